//! Piecewise polynomials on the `d+1` children of a split simplex, and the
//! continuous piecewise-linear functions `λ_0, .., λ_{d+1}`.
//!
//! Child `i` has vertices `[x0, x_j (j ≠ i)]`, so its own barycentric
//! coordinates are `λ_0` (slot 0) followed by `λ_{1+j}`, `j ≠ i`. Here `λ`
//! index `1 + j` belongs to macro vertex `j` (0-based).

use super::BaryPoly;
use crate::error::{Error, Result};
use crate::mesh::geometry::{bary_gradients, barycentric_coords, signed_volume};
use crate::mesh::RefinedMesh;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Continuity {
    L2,
    C0,
}

/// One polynomial per child, each in that child's barycentric coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPoly<T: Scalar> {
    pub pieces: Vec<BaryPoly<T>>,
    pub continuity: Continuity,
}

pub type VectorField<T> = Vec<SplitPoly<T>>;

impl<T: Scalar> SplitPoly<T> {
    pub fn zero(d: usize, degree: usize) -> Self {
        SplitPoly { pieces: vec![BaryPoly::zero(d + 1, degree); d + 1], continuity: Continuity::C0 }
    }

    pub fn constant(d: usize, degree: usize, c: T) -> Self {
        SplitPoly { pieces: vec![BaryPoly::constant_of_degree(d + 1, degree, c); d + 1], continuity: Continuity::C0 }
    }

    /// Piecewise constant `vals[i]` on child `i`, written in `degree`.
    pub fn piecewise_constant(vals: &[T], degree: usize) -> Self {
        let n = vals.len();
        SplitPoly {
            pieces: vals.iter().map(|v| BaryPoly::constant_of_degree(n, degree, v.clone())).collect(),
            continuity: Continuity::L2,
        }
    }

    pub fn dim(&self) -> usize {
        self.pieces.len() - 1
    }

    pub fn degree(&self) -> usize {
        self.pieces.iter().map(|p| p.degree()).max().unwrap_or(0)
    }

    pub fn elevate(&self, k: usize) -> Self {
        SplitPoly { pieces: self.pieces.iter().map(|p| p.elevate(k)).collect(), continuity: self.continuity }
    }

    fn zip(&self, other: &Self, f: impl Fn(&BaryPoly<T>, &BaryPoly<T>) -> Result<BaryPoly<T>>) -> Result<Self> {
        if self.pieces.len() != other.pieces.len() {
            return Err(Error::CellMismatch);
        }
        let pieces = self.pieces.iter().zip(&other.pieces).map(|(a, b)| f(a, b)).collect::<Result<_>>()?;
        let continuity = if self.continuity == Continuity::C0 && other.continuity == Continuity::C0 { Continuity::C0 } else { Continuity::L2 };
        Ok(SplitPoly { pieces, continuity })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a.add(b))
    }
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a.sub(b))
    }
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a.mul(b))
    }
    pub fn scale(&self, s: &T) -> Self {
        SplitPoly { pieces: self.pieces.iter().map(|p| p.scale(s)).collect(), continuity: self.continuity }
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(|p| p.is_zero())
    }
    pub fn max_abs(&self) -> f64 {
        self.pieces.iter().map(|p| p.max_abs()).fold(0.0, f64::max)
    }

    pub fn to_f64(&self) -> SplitPoly<f64> {
        SplitPoly { pieces: self.pieces.iter().map(|p| p.to_f64()).collect(), continuity: self.continuity }
    }
}

/// Geometry of one split cell together with its `λ` functions.
#[derive(Debug, Clone)]
pub struct LambdaSystem<T: Scalar> {
    pub d: usize,
    pub macro_points: Vec<Vec<T>>,
    pub split_point: Vec<T>,
    /// `child_points[i]` = `[x0, x_j (j ≠ i)]`.
    pub child_points: Vec<Vec<Vec<T>>>,
    /// `child_grads[i][slot]`: gradient of the child's barycentric coordinate.
    pub child_grads: Vec<Vec<Vec<T>>>,
    pub child_volumes: Vec<T>,
    pub volume: T,
    /// Macro barycentric coordinates of the split point, `μ_j(x0)`.
    pub mu_x0: Vec<T>,
    /// Constant gradients `∇μ_j`.
    pub mu_grads: Vec<Vec<T>>,
    /// `f64` copies used for point location and sampling.
    child_points_f64: Vec<Vec<Vec<f64>>>,
}

impl<T: Scalar> LambdaSystem<T> {
    pub fn new(macro_points: &[Vec<f64>], split_point: &[f64]) -> Result<Self> {
        let d = split_point.len();
        let mp: Vec<Vec<T>> = macro_points.iter().map(|p| p.iter().map(|&x| T::from_f64(x)).collect()).collect();
        let x0: Vec<T> = split_point.iter().map(|&x| T::from_f64(x)).collect();
        let mu_grads = bary_gradients(&mp).ok_or(Error::DegenerateCell { cell: 0, volume: 0.0 })?;
        let mut mu_x0 = vec![T::zero(); d + 1];
        for j in 1..=d {
            let mut acc = T::zero();
            for r in 0..d {
                acc = acc + mu_grads[j][r].clone() * (x0[r].clone() - mp[0][r].clone());
            }
            mu_x0[j] = acc;
        }
        mu_x0[0] = mu_x0[1..].iter().fold(T::one(), |a, b| a - b.clone());
        let mut child_points = Vec::with_capacity(d + 1);
        let mut child_grads = Vec::with_capacity(d + 1);
        let mut child_volumes = Vec::with_capacity(d + 1);
        for i in 0..=d {
            let mut pts = vec![x0.clone()];
            pts.extend(mp.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, p)| p.clone()));
            let g = bary_gradients(&pts).ok_or(Error::DegenerateChild(i))?;
            let v = signed_volume(&pts);
            let v = if v.to_f64() < 0.0 { -v } else { v };
            if v.is_zero() {
                return Err(Error::DegenerateChild(i));
            }
            child_points.push(pts);
            child_grads.push(g);
            child_volumes.push(v);
        }
        let volume = child_volumes.iter().fold(T::zero(), |a, b| a + b.clone());
        let child_points_f64 = child_points.iter().map(|c| c.iter().map(|p| p.iter().map(|x| x.to_f64()).collect()).collect()).collect();
        Ok(LambdaSystem { d, macro_points: mp, split_point: x0, child_points, child_grads, child_volumes, volume, mu_x0, mu_grads, child_points_f64 })
    }

    pub fn from_refined(refined: &RefinedMesh, cell: usize) -> Result<Self> {
        Self::new(&refined.macro_mesh().cell_points(cell), refined.split_point(cell))
    }

    pub fn nvars(&self) -> usize {
        self.d + 1
    }

    /// Slot of `λ_lam` in child `child`'s coordinates, or `None` when
    /// `λ_lam` vanishes on that child.
    pub fn slot_of(&self, child: usize, lam: usize) -> Option<usize> {
        if lam == 0 {
            return Some(0);
        }
        let j = lam - 1;
        match j.cmp(&child) {
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Less => Some(1 + j),
            std::cmp::Ordering::Greater => Some(j),
        }
    }

    /// `λ` index held by `slot` of child `child`.
    pub fn lambda_of_slot(&self, child: usize, slot: usize) -> usize {
        if slot == 0 {
            0
        } else if slot - 1 < child {
            slot
        } else {
            slot + 1
        }
    }

    pub fn lambda(&self, lam: usize) -> SplitPoly<T> {
        let n = self.nvars();
        let pieces = (0..=self.d)
            .map(|i| match self.slot_of(i, lam) {
                Some(s) => BaryPoly::var(n, s),
                None => BaryPoly::zero(n, 1),
            })
            .collect();
        SplitPoly { pieces, continuity: Continuity::C0 }
    }

    pub fn grad_lambda(&self, lam: usize, child: usize) -> Vec<T> {
        match self.slot_of(child, lam) {
            Some(s) => self.child_grads[child][s].clone(),
            None => vec![T::zero(); self.d],
        }
    }

    pub fn grad_lambda0(&self, child: usize) -> Vec<T> {
        self.child_grads[child][0].clone()
    }

    /// Macro coordinate `μ_j` in child `i`'s coordinates:
    /// `μ_j = λ_{1+j} + μ_j(x0) λ_0`.
    pub fn mu_on_child(&self, j: usize, child: usize) -> BaryPoly<T> {
        let mut c = vec![T::zero(); self.nvars()];
        c[0] = self.mu_x0[j].clone();
        if let Some(s) = self.slot_of(child, j + 1) {
            c[s] = T::one();
        }
        BaryPoly::linear(c)
    }

    /// Re-expands a polynomial given in the macro barycentric coordinates on
    /// every child.
    pub fn restrict_macro(&self, p: &BaryPoly<T>) -> Result<SplitPoly<T>> {
        if p.nvars() != self.nvars() {
            return Err(Error::SimplexMismatch);
        }
        let pieces = (0..=self.d)
            .map(|i| {
                let subs: Vec<BaryPoly<T>> = (0..=self.d).map(|j| self.mu_on_child(j, i)).collect();
                p.compose(&subs)
            })
            .collect::<Result<_>>()?;
        Ok(SplitPoly { pieces, continuity: Continuity::C0 })
    }

    pub fn gradient(&self, p: &SplitPoly<T>) -> VectorField<T> {
        let per_child: Vec<Vec<BaryPoly<T>>> = p.pieces.iter().enumerate().map(|(i, q)| q.gradient(&self.child_grads[i])).collect();
        (0..self.d)
            .map(|r| SplitPoly { pieces: per_child.iter().map(|g| g[r].clone()).collect(), continuity: Continuity::L2 })
            .collect()
    }

    pub fn divergence(&self, v: &[SplitPoly<T>]) -> Result<SplitPoly<T>> {
        if v.len() != self.d {
            return Err(Error::DimensionMismatch(format!("{} components in dimension {}", v.len(), self.d)));
        }
        let n = self.nvars();
        let mut pieces = Vec::with_capacity(self.d + 1);
        for i in 0..=self.d {
            let k = v.iter().map(|c| c.pieces[i].degree()).max().unwrap_or(0).saturating_sub(1);
            let mut acc = BaryPoly::zero(n, k);
            for (r, comp) in v.iter().enumerate() {
                let q = comp.pieces[i].elevate(k + 1);
                for s in 0..n {
                    let g = self.child_grads[i][s][r].clone();
                    if g.is_zero() {
                        continue;
                    }
                    acc = acc.add(&q.derivative(s).scale(&g))?;
                }
            }
            pieces.push(acc);
        }
        Ok(SplitPoly { pieces, continuity: Continuity::L2 })
    }

    pub fn integrate(&self, p: &SplitPoly<T>) -> T {
        p.pieces.iter().zip(&self.child_volumes).fold(T::zero(), |acc, (q, v)| acc + q.integrate(v))
    }

    pub fn l2_inner(&self, a: &SplitPoly<T>, b: &SplitPoly<T>) -> Result<T> {
        Ok(self.integrate(&a.mul(b)?))
    }

    pub fn l2_norm(&self, p: &SplitPoly<T>) -> f64 {
        self.l2_inner(p, p).map(|v| v.to_f64().max(0.0).sqrt()).unwrap_or(f64::NAN)
    }

    pub fn h1_seminorm(&self, p: &SplitPoly<T>) -> f64 {
        self.gradient(p).iter().map(|g| self.l2_norm(g).powi(2)).sum::<f64>().sqrt()
    }

    pub fn vector_l2_norm(&self, v: &[SplitPoly<T>]) -> f64 {
        v.iter().map(|c| self.l2_norm(c).powi(2)).sum::<f64>().sqrt()
    }

    pub fn vector_h1_norm(&self, v: &[SplitPoly<T>]) -> f64 {
        v.iter().map(|c| self.l2_norm(c).powi(2) + self.h1_seminorm(c).powi(2)).sum::<f64>().sqrt()
    }

    pub fn mean(&self, p: &SplitPoly<T>) -> T {
        self.integrate(p) / self.volume.clone()
    }

    /// Child containing `x` and the child barycentric coordinates of `x`.
    pub fn locate(&self, x: &[f64]) -> (usize, Vec<f64>) {
        let mut best = (0, vec![], f64::NEG_INFINITY);
        for (i, pts) in self.child_points_f64.iter().enumerate() {
            let lam = barycentric_coords(pts, x).expect("valid child");
            let m = lam.iter().copied().fold(f64::INFINITY, f64::min);
            if m > best.2 {
                best = (i, lam, m);
            }
        }
        (best.0, best.1)
    }

    pub fn child_coords(&self, child: usize, x: &[f64]) -> Vec<f64> {
        barycentric_coords(&self.child_points_f64[child], x).expect("valid child")
    }

    pub fn eval(&self, p: &SplitPoly<T>, x: &[f64]) -> f64 {
        let (i, lam) = self.locate(x);
        p.pieces[i].eval_f64(&lam)
    }

    /// Physical point from macro barycentric coordinates.
    pub fn macro_point(&self, mu: &[f64]) -> Vec<f64> {
        (0..self.d).map(|r| mu.iter().zip(&self.macro_points).map(|(m, p)| m * p[r].to_f64()).sum()).collect()
    }

    /// Largest jump of `p` across the interior interfaces, sampled on the
    /// order-`n` lattice of every interface.
    pub fn continuity_residual(&self, p: &SplitPoly<T>, n: usize) -> f64 {
        let d = self.d;
        let lattice = super::monomials(d, n.max(1));
        let mut worst: f64 = 0.0;
        for a in 0..=d {
            for b in a + 1..=d {
                // interface between children a and b: x0 and x_j, j ∉ {a, b}
                let mut verts: Vec<Vec<f64>> = vec![self.split_point.iter().map(|x| x.to_f64()).collect()];
                verts.extend(self.macro_points.iter().enumerate().filter(|&(j, _)| j != a && j != b).map(|(_, p)| p.iter().map(|x| x.to_f64()).collect()));
                for w in lattice.iter() {
                    let x: Vec<f64> = (0..d).map(|r| w.iter().zip(&verts).map(|(&wi, v)| wi as f64 * v[r]).sum::<f64>() / n.max(1) as f64).collect();
                    let va = p.pieces[a].eval_f64(&self.child_coords(a, &x));
                    let vb = p.pieces[b].eval_f64(&self.child_coords(b, &x));
                    worst = worst.max((va - vb).abs());
                }
            }
        }
        worst
    }

    /// Value of `p` on macro facet `F_i` at facet barycentric coordinates
    /// `w` (one weight per macro vertex `j ≠ i`, in ascending order).
    pub fn trace_on_facet(&self, p: &SplitPoly<T>, i: usize, w: &[f64]) -> f64 {
        let mut lam = vec![0.0];
        lam.extend_from_slice(w);
        p.pieces[i].eval_f64(&lam)
    }
}
