//! Right inverse of the divergence on one split cell: for a piecewise
//! polynomial `p` of degree `k-1` with zero mean, builds a continuous
//! piecewise polynomial field `v` of degree `k` vanishing on the cell
//! boundary with `div v = p`.
//!
//! The construction works layer by layer in powers of `λ_0`: every
//! `p ∈ P_s(Kʳ)` is written as `Σ_ℓ λ_0^ℓ Σ_{|α|=s-ℓ} a_α λ^α` with
//! piecewise constant `a_α` supported where `λ^α` is not identically zero.
//! Each layer with `|α| ≥ 1` is cancelled by `λ_0^{ℓ+1} Σ s_α λ^α`, pushing
//! a residual into layer `ℓ+1`; the final constant layer is removed by a
//! multiple of `λ_0^k`.

use crate::error::{Error, Result};
use crate::poly::{BaryPoly, Continuity, LambdaSystem, MultiIndex, SplitPoly, VectorField};
use crate::scalar::{gauss_solve, min_norm_solve, Scalar};
use serde::Serialize;
use std::collections::BTreeMap;

/// Highest velocity degree accepted by [`solve_local_div`].
pub const MAX_LOCAL_DEGREE: usize = 8;

/// Terms `λ_0^ℓ a_α λ^α` of one layer; `α` runs over the `d+1` macro
/// vertices and `a_α[i]` is the value on child `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T: Scalar> {
    pub l: usize,
    pub terms: BTreeMap<MultiIndex, Vec<T>>,
}

impl<T: Scalar> Layer<T> {
    pub fn empty(l: usize) -> Self {
        Layer { l, terms: BTreeMap::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|v| v.iter().all(|c| c.is_zero()))
    }

    fn add_term(&mut self, alpha: MultiIndex, child: usize, c: T, n: usize) {
        let e = self.terms.entry(alpha).or_insert_with(|| vec![T::zero(); n]);
        e[child] = e[child].clone() + c;
    }

    /// `self -= other`, keeping the support condition.
    pub fn subtract(&mut self, other: &Layer<T>) {
        for (a, vals) in &other.terms {
            let n = vals.len();
            for (i, v) in vals.iter().enumerate() {
                if !v.is_zero() {
                    self.add_term(a.clone(), i, -v.clone(), n);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerDecomposition<T: Scalar> {
    pub s: usize,
    pub layers: Vec<Layer<T>>,
}

/// Monomial exponent in child `i`'s slots for `λ_0^l λ^α`, or `None` when
/// `λ^α` vanishes on the child.
fn child_exponent<T: Scalar>(ls: &LambdaSystem<T>, child: usize, l: usize, alpha: &[u32]) -> Option<MultiIndex> {
    if alpha[child] > 0 {
        return None;
    }
    let mut e = vec![0u32; ls.nvars()];
    e[0] = l as u32;
    for (j, &a) in alpha.iter().enumerate() {
        if j != child {
            e[ls.slot_of(child, j + 1).expect("j ≠ child")] = a;
        }
    }
    Some(e)
}

/// Unique layer form of `p`, read off from the child-local expansions.
pub fn decompose<T: Scalar>(p: &SplitPoly<T>, ls: &LambdaSystem<T>) -> Result<LayerDecomposition<T>> {
    if p.pieces.len() != ls.d + 1 {
        return Err(Error::CellMismatch);
    }
    let s = p.degree();
    let n = ls.d + 1;
    let mut layers: Vec<Layer<T>> = (0..=s).map(Layer::empty).collect();
    for (i, piece) in p.pieces.iter().enumerate() {
        for (beta, c) in piece.elevate(s).terms() {
            let mut alpha = vec![0u32; n];
            for slot in 1..n {
                alpha[ls.lambda_of_slot(i, slot) - 1] = beta[slot];
            }
            layers[beta[0] as usize].add_term(alpha, i, c, n);
        }
    }
    Ok(LayerDecomposition { s, layers })
}

/// Inverse of [`decompose`].
pub fn reconstruct<T: Scalar>(dec: &LayerDecomposition<T>, ls: &LambdaSystem<T>) -> SplitPoly<T> {
    let mut out = SplitPoly::zero(ls.d, dec.s);
    out.continuity = Continuity::L2;
    for layer in &dec.layers {
        for (alpha, vals) in &layer.terms {
            for (i, c) in vals.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                if let Some(e) = child_exponent(ls, i, layer.l, alpha) {
                    let slot: &mut T = out.pieces[i].coeff_mut(&e);
                    *slot = slot.clone() + c.clone();
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct StepResult<T: Scalar> {
    /// `λ_0^{ℓ+1} Σ s_α λ^α`.
    pub v: VectorField<T>,
    /// `λ_0^{ℓ+1} Σ s_α · ∇(λ^α)` in layer form at level `ℓ+1`.
    pub q: Layer<T>,
    pub s: BTreeMap<MultiIndex, Vec<T>>,
}

fn vector_from_terms<T: Scalar>(ls: &LambdaSystem<T>, l: usize, s: &BTreeMap<MultiIndex, Vec<T>>, degree: usize) -> VectorField<T> {
    let mut v = vec![SplitPoly::zero(ls.d, degree); ls.d];
    for (alpha, sa) in s {
        for i in 0..=ls.d {
            if let Some(e) = child_exponent(ls, i, l, alpha) {
                for (r, comp) in v.iter_mut().enumerate() {
                    if !sa[r].is_zero() {
                        let slot: &mut T = comp.pieces[i].coeff_mut(&e);
                        *slot = slot.clone() + sa[r].clone();
                    }
                }
            }
        }
    }
    v
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}

/// Cancels one layer with `|α| = m ≥ 1`.
pub fn step<T: Scalar>(layer: &Layer<T>, ls: &LambdaSystem<T>) -> Result<StepResult<T>> {
    let d = ls.d;
    let l = layer.l;
    let m = layer.terms.keys().next().map(|a| a.iter().sum::<u32>() as usize).unwrap_or(1);
    if m == 0 {
        return Err(Error::DegreeMismatch { expected: 1, found: 0 });
    }
    let factor = T::from_i64(l as i64 + 1);
    let mut s_map = BTreeMap::new();
    let mut q = Layer::empty(l + 1);
    for (alpha, b) in &layer.terms {
        if b.iter().all(|c| c.is_zero()) {
            continue;
        }
        let active: Vec<usize> = (0..=d).filter(|&i| alpha[i] == 0).collect();
        let rows: Vec<Vec<T>> = active.iter().map(|&i| ls.grad_lambda0(i).into_iter().map(|g| g * factor.clone()).collect()).collect();
        let rhs: Vec<T> = active.iter().map(|&i| b[i].clone()).collect();
        let s = min_norm_solve(&rows, &rhs, d).ok_or(Error::SingularNormalSystem)?;
        for (j, &aj) in alpha.iter().enumerate() {
            if aj == 0 {
                continue;
            }
            let mut beta = alpha.clone();
            beta[j] -= 1;
            for &i in &active {
                if beta[i] > 0 || i == j {
                    continue;
                }
                let c = T::from_i64(aj as i64) * dot(&s, &ls.grad_lambda(j + 1, i));
                if !c.is_zero() {
                    q.add_term(beta.clone(), i, c, d + 1);
                }
            }
        }
        s_map.insert(alpha.clone(), s);
    }
    let v = vector_from_terms(ls, l + 1, &s_map, l + 1 + m);
    Ok(StepResult { v, q, s: s_map })
}

#[derive(Debug, Clone)]
pub struct FinalCorrection<T: Scalar> {
    pub v: VectorField<T>,
    pub s: Vec<T>,
    /// `|k s·∇λ_0|_{K_0} - b_0|`, the child identity that is not imposed.
    pub identity_residual: f64,
}

fn mean_tolerance<T: Scalar>(scale: f64) -> f64 {
    if T::EXACT {
        0.0
    } else {
        1e-10 * scale
    }
}

/// Removes `b λ_0^{k-1}` (piecewise constant `b`, zero mean) with
/// `v = s λ_0^k`, solving on children `1..=d` only and checking child `0`.
pub fn final_correction<T: Scalar>(b: &[T], k: usize, ls: &LambdaSystem<T>) -> Result<FinalCorrection<T>> {
    let d = ls.d;
    let weighted = b.iter().zip(&ls.child_volumes).fold(T::zero(), |a, (x, v)| a + x.clone() * v.clone());
    let scale: f64 = b.iter().zip(&ls.child_volumes).map(|(x, v)| x.abs_f64() * v.abs_f64()).sum();
    if weighted.abs_f64() > mean_tolerance::<T>(scale) {
        return Err(Error::MeanNotZero(weighted.to_f64() / ls.volume.to_f64()));
    }
    if b.iter().all(|x| x.is_zero()) {
        return Ok(FinalCorrection { v: vec![SplitPoly::zero(d, k); d], s: vec![T::zero(); d], identity_residual: 0.0 });
    }
    let kk = T::from_i64(k as i64);
    let rows: Vec<Vec<T>> = (1..=d).map(|i| ls.grad_lambda0(i).into_iter().map(|g| g * kk.clone()).collect()).collect();
    let rhs: Vec<T> = b[1..].to_vec();
    let s = gauss_solve(rows, rhs).ok_or(Error::SingularNormalSystem)?;
    let lhs0 = kk * dot(&s, &ls.grad_lambda0(0));
    let identity_residual = (lhs0 - b[0].clone()).abs_f64();
    let bmax = b.iter().map(|x| x.abs_f64()).fold(0.0, f64::max);
    if identity_residual > mean_tolerance::<T>(bmax) {
        return Err(Error::CorrectionIdentity(identity_residual));
    }
    let mut sm = BTreeMap::new();
    sm.insert(vec![0u32; d + 1], s.clone());
    let v = vector_from_terms(ls, k, &sm, k);
    Ok(FinalCorrection { v, s, identity_residual })
}

#[derive(Debug, Clone)]
pub struct DivSolveReport<T: Scalar> {
    pub v: VectorField<T>,
    /// `‖div v − p‖_{L²(K)}`.
    pub residual_norm: f64,
    /// Largest coefficient of `div v − p`.
    pub residual_coeff: f64,
    pub p_norm: f64,
    /// `‖v‖_{H¹(K)} / ‖p‖_{L²(K)}`.
    pub stability_ratio: f64,
    pub identity_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DivSolveSummary {
    pub residual_norm: f64,
    pub residual_coeff: f64,
    pub p_norm: f64,
    pub stability_ratio: f64,
    pub identity_residual: f64,
}

impl<T: Scalar> DivSolveReport<T> {
    pub fn summary(&self) -> DivSolveSummary {
        DivSolveSummary {
            residual_norm: self.residual_norm,
            residual_coeff: self.residual_coeff,
            p_norm: self.p_norm,
            stability_ratio: self.stability_ratio,
            identity_residual: self.identity_residual,
        }
    }
}

fn add_fields<T: Scalar>(a: &mut VectorField<T>, b: &VectorField<T>) -> Result<()> {
    for (x, y) in a.iter_mut().zip(b) {
        *x = x.add(y)?;
    }
    Ok(())
}

/// Builds `v ∈ P̊_kᶜ(Kʳ)^d` with `div v = p` for zero-mean `p` of degree
/// at most `k - 1`.
pub fn solve_local_div<T: Scalar>(p: &SplitPoly<T>, k: usize, ls: &LambdaSystem<T>) -> Result<DivSolveReport<T>> {
    let d = ls.d;
    if k == 0 {
        return Err(Error::UnsupportedDegree(0));
    }
    if k > MAX_LOCAL_DEGREE {
        return Err(Error::DegreeTooHigh(k));
    }
    if p.pieces.len() != d + 1 {
        return Err(Error::CellMismatch);
    }
    if p.degree() > k - 1 {
        return Err(Error::DegreeMismatch { expected: k - 1, found: p.degree() });
    }
    let s = k - 1;
    let p = p.elevate(s);
    let p_norm = ls.l2_norm(&p);
    let integral = ls.integrate(&p);
    if integral.abs_f64() > mean_tolerance::<T>(p_norm * ls.volume.to_f64().sqrt()) {
        return Err(Error::MeanNotZero(integral.to_f64() / ls.volume.to_f64()));
    }
    let mut dec = decompose(&p, ls)?;
    let mut v: VectorField<T> = vec![SplitPoly::zero(d, k); d];
    for l in 0..s {
        let st = step(&dec.layers[l], ls)?;
        add_fields(&mut v, &st.v)?;
        dec.layers[l + 1].subtract(&st.q);
    }
    let b = dec.layers[s].terms.get(&vec![0u32; d + 1]).cloned().unwrap_or_else(|| vec![T::zero(); d + 1]);
    let fc = final_correction(&b, k, ls)?;
    add_fields(&mut v, &fc.v)?;
    for c in &mut v {
        c.continuity = Continuity::C0;
    }
    let diff = ls.divergence(&v)?.sub(&p)?;
    let residual_norm = ls.l2_norm(&diff);
    let residual_coeff = diff.max_abs();
    let stability_ratio = if p_norm > 0.0 { ls.vector_h1_norm(&v) / p_norm } else { 0.0 };
    Ok(DivSolveReport { v, residual_norm, residual_coeff, p_norm, stability_ratio, identity_residual: fc.identity_residual })
}

/// Largest `|v|` over `n` seeded random points on each boundary facet.
pub fn boundary_trace_max<T: Scalar, R: rand::Rng>(v: &[SplitPoly<T>], ls: &LambdaSystem<T>, n: usize, rng: &mut R) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..=ls.d {
        for _ in 0..n {
            let w = crate::rng::random_bary(ls.d, rng);
            for c in v {
                worst = worst.max(ls.trace_on_facet(c, i, &w).abs());
            }
        }
    }
    worst
}

/// A piecewise polynomial given by one `BaryPoly` per child.
pub fn split_from_pieces<T: Scalar>(pieces: Vec<BaryPoly<T>>) -> SplitPoly<T> {
    SplitPoly { pieces, continuity: Continuity::L2 }
}
