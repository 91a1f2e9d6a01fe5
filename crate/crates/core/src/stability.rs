//! Discrete inf-sup constants, the refined/macro equivalence, the bootstrap
//! from macro-cell constants to broken pressures, and constructive
//! surjectivity of the divergence.

use crate::error::{Error, Result};
use crate::linalg::{col, singular_values, DenseMatrix, SparseSpd};
use crate::mesh::RefinedMesh;
use crate::space::{assemble, build_pair, lagrange, local_rank, AssembledOperators, CellTab, DofKey, FeSpace, Level, PairKind, StokesPair};
use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Par, Side};
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// Threshold separating stable from locked pairs.
pub const STABLE_THRESHOLD: f64 = 1e-8;
/// Velocity dimension up to which the singular-value route is used.
pub const DENSE_SVD_LIMIT: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InfSupMethod {
    Auto,
    /// Smallest singular value of `Zᵀ L_p⁻¹ B L_u⁻ᵀ`.
    Svd,
    /// Smallest eigenvalue of the deflated Schur pencil `B M_u⁻¹ Bᵀ`, `M_p`.
    Schur,
}

#[derive(Debug, Clone, Serialize)]
pub struct InfSupReport {
    pub pair: String,
    pub d: usize,
    pub k: usize,
    pub level: usize,
    pub n_u: usize,
    pub n_p: usize,
    pub beta_h: f64,
    pub method: InfSupMethod,
}

/// Householder reflector sending `w` (unit) to `±e_0`, applied to the rows
/// of `x`; returns rows `1..` (a basis of `w⊥` applied to `x`).
fn deflate_rows(w: &[f64], x: &DenseMatrix<f64>) -> DenseMatrix<f64> {
    let n = w.len();
    let mut v = w.to_vec();
    let s = if w[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += s;
    let vv: f64 = v.iter().map(|a| a * a).sum();
    let mut out = DenseMatrix::zeros(n - 1, x.ncols());
    for j in 0..x.ncols() {
        let dot: f64 = (0..n).map(|i| v[i] * x[(i, j)]).sum();
        let f = 2.0 * dot / vv;
        for i in 1..n {
            out[(i - 1, j)] = x[(i, j)] - f * v[i];
        }
    }
    out
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / n).collect()
}

/// `β_h` from assembled operators; `constant` holds the pressure
/// coefficients of the constant function.
pub fn infsup_from_operators(ops: &AssembledOperators, constant: &[f64], method: InfSupMethod) -> Result<(f64, InfSupMethod)> {
    let (np, nu) = (ops.b.nrows, ops.b.ncols);
    if np <= 1 {
        return Err(Error::EmptyPressureSpace);
    }
    if nu == 0 {
        return Err(Error::EmptyVelocitySpace);
    }
    let method = match method {
        InfSupMethod::Auto if nu <= DENSE_SVD_LIMIT => InfSupMethod::Svd,
        InfSupMethod::Auto => InfSupMethod::Schur,
        m => m,
    };
    let mp = ops.m_p.to_dense();
    let lp = mp.llt(Side::Lower).map_err(|_| Error::MassNotSpd)?;
    let lp = lp.L().to_owned();
    // w = L_pᵀ c
    let w = unit((0..np).map(|i| (i..np).map(|r| lp[(r, i)] * constant[r]).sum()).collect());
    if nu < np - 1 {
        return Ok((0.0, method));
    }
    match method {
        InfSupMethod::Svd => {
            let mu = ops.m_u.to_dense();
            let lu = mu.llt(Side::Lower).map_err(|_| Error::NotSpd)?;
            // X = L_u⁻¹ Bᵀ, then Y = L_p⁻¹ Xᵀ
            let mut x = ops.b.transpose().to_dense();
            solve_lower_triangular_in_place(lu.L(), x.as_mut(), Par::rayon(0));
            let mut y = x.transpose().to_owned();
            solve_lower_triangular_in_place(lp.as_ref(), y.as_mut(), Par::rayon(0));
            let z = deflate_rows(&w, &y);
            let s = singular_values(z.as_ref())?;
            Ok((s.last().copied().unwrap_or(0.0), method))
        }
        _ => {
            let chol = SparseSpd::new(&ops.m_u)?;
            let bt = ops.b.transpose().to_dense();
            let x = chol.solve_many(bt.as_ref());
            let s = ops.b.to_faer() * &x;
            // C = L_p⁻¹ S L_p⁻ᵀ
            let mut c = s.clone();
            solve_lower_triangular_in_place(lp.as_ref(), c.as_mut(), Par::rayon(0));
            let mut c = c.transpose().to_owned();
            solve_lower_triangular_in_place(lp.as_ref(), c.as_mut(), Par::rayon(0));
            let half = deflate_rows(&w, &c);
            let full = deflate_rows(&w, &half.transpose().to_owned());
            let n = full.nrows();
            let sym = DenseMatrix::from_fn(n, n, |i, j| 0.5 * (full[(i, j)] + full[(j, i)]));
            let e = sym.self_adjoint_eigenvalues(Side::Lower).map_err(|e| Error::Linalg(format!("{e:?}")))?;
            Ok((e.first().copied().unwrap_or(0.0).max(0.0).sqrt(), method))
        }
    }
}

pub fn infsup_constant(pair: &StokesPair, level: usize, method: InfSupMethod) -> Result<InfSupReport> {
    let ops = assemble(&pair.velocity, &pair.pressure)?;
    let constant = pair.pressure.constant.as_ref().ok_or(Error::EmptyPressureSpace)?;
    let (beta_h, method) = infsup_from_operators(&ops, constant, method)?;
    Ok(InfSupReport {
        pair: pair.kind.name().to_string(),
        d: pair.velocity.dim(),
        k: pair.k,
        level,
        n_u: pair.velocity.ndofs,
        n_p: pair.pressure.ndofs,
        beta_h,
        method,
    })
}

/// `β_h` of a velocity space against an arbitrary pressure space, with the
/// conventions used by the equivalence check: `None` when the mean-free
/// pressure space is trivial, `0` when the velocity space is empty.
pub fn beta_between(vel: &FeSpace, pres: &FeSpace) -> Result<Option<f64>> {
    let ops = assemble(vel, pres)?;
    let constant = pres.constant.as_ref().ok_or(Error::EmptyPressureSpace)?;
    match infsup_from_operators(&ops, constant, InfSupMethod::Auto) {
        Ok((b, _)) => Ok(Some(b)),
        Err(Error::EmptyPressureSpace) => Ok(None),
        Err(Error::EmptyVelocitySpace) => Ok(Some(0.0)),
        Err(e) => Err(e),
    }
}

/// Whether every basis function of `small` lies in `big`, by comparing
/// local ranks on each macro cell.
pub fn contains(big: &FeSpace, small: &FeSpace) -> Result<bool> {
    let both = FeSpace::union_unchecked("union", &[big, small])?;
    for c in 0..big.cells.len() {
        if local_rank(&both, c)? > local_rank(big, c)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapReport {
    pub k: usize,
    /// `β_h` against macro-cell constants.
    pub beta_macro: Option<f64>,
    /// `β_h` against broken `P̊ₖ₋₁(𝒯ₕʳ)`.
    pub beta_refined: Option<f64>,
    /// The implication "macro stable ⇒ refined stable" holds.
    pub consistent: bool,
}

fn stable(b: Option<f64>) -> bool {
    b.map(|x| x > STABLE_THRESHOLD).unwrap_or(true)
}

/// Checks that a velocity space containing `P̊ₖᶜ(𝒯ₕʳ)` that is stable with
/// macro-cell constants is also stable with broken `P̊ₖ₋₁(𝒯ₕʳ)`.
pub fn bootstrap_check(vel: &FeSpace, k: usize) -> Result<BootstrapReport> {
    let refined = &vel.refined;
    let pk = lagrange(refined, Level::Refined, k, true, vel.ncomp, true)?;
    if !contains(vel, &pk)? {
        return Err(Error::HypothesisViolated(format!("velocity space does not contain P{k} on the split mesh")));
    }
    let p0 = lagrange(refined, Level::Macro, 0, false, 1, false)?;
    let pr = lagrange(refined, Level::Refined, k - 1, false, 1, false)?;
    let beta_macro = beta_between(vel, &p0)?;
    let beta_refined = beta_between(vel, &pr)?;
    let consistent = !stable(beta_macro) || stable(beta_refined);
    Ok(BootstrapReport { k, beta_macro, beta_refined, consistent })
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub k: usize,
    pub n_cells: usize,
    /// `β_h` of `P̊ₖᶜ(𝒯ₕʳ)`–`P̊ₖ₋₁(𝒯ₕʳ)`.
    pub beta_refined: Option<f64>,
    /// `β_h` of `P̊ₖᶜ(𝒯ₕ)`–`P̊₀(𝒯ₕ)`.
    pub beta_macro: Option<f64>,
    pub refined_stable: bool,
    pub macro_stable: bool,
    pub agree: bool,
}

pub fn equivalence_check(refined: &Arc<RefinedMesh>, k: usize) -> Result<EquivalenceReport> {
    let a = build_pair(PairKind::PkPk1r, refined, k)?;
    let b = build_pair(PairKind::PkP0, refined, k)?;
    let beta_refined = beta_between(&a.velocity, &a.pressure)?;
    let beta_macro = beta_between(&b.velocity, &b.pressure)?;
    let (rs, ms) = (stable(beta_refined), stable(beta_macro));
    Ok(EquivalenceReport { k, n_cells: refined.num_cells(), beta_refined, beta_macro, refined_stable: rs, macro_stable: ms, agree: rs == ms })
}

/// `‖div v − p‖_{L²}` and `‖p‖_{L²}` for coefficient vectors of a velocity
/// and a pressure space, by quadrature.
pub fn divergence_mismatch(vel: &FeSpace, v: &[f64], pres: &FeSpace, p: &[f64]) -> Result<(f64, f64)> {
    let deg = (2 * vel.degree).max(2 * pres.degree).max(1);
    let parts: Vec<(f64, f64)> = (0..vel.cells.len())
        .into_par_iter()
        .map(|c| {
            let tv = CellTab::new(vel, c, deg, true)?;
            let tp = CellTab::new(pres, c, deg, false)?;
            let (mut r, mut n) = (0.0, 0.0);
            for (i, ch) in tv.children.iter().enumerate() {
                for (q, &w) in ch.weights.iter().enumerate() {
                    let dv: f64 = tv.dofs.iter().enumerate().map(|(f, &g)| v[g] * tv.div(f, i, q)).sum();
                    let pv: f64 = tp.dofs.iter().enumerate().map(|(f, &g)| p[g] * tp.values[f][i][q]).sum();
                    r += w * (dv - pv).powi(2);
                    n += w * pv * pv;
                }
            }
            Ok((r, n))
        })
        .collect::<Result<_>>()?;
    let (r, n) = parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok((r.sqrt(), n.sqrt()))
}

#[derive(Debug, Clone, Serialize)]
pub struct SurjectivityReport {
    pub velocity: Vec<f64>,
    /// `‖div v − p‖_{L²}`.
    pub residual: f64,
    pub p_norm: f64,
    /// Largest `|div v(x) − p(x)|` over macro vertices (zero when the target
    /// has no vertex values).
    pub vertex_mismatch: f64,
}

/// Fluxes `f_F` through interior facets (canonical normals) with
/// `Σ_F ±f_F = target[K]` on every macro cell.
fn flux_balance(refined: &RefinedMesh, target: &[f64]) -> Result<std::collections::BTreeMap<Vec<usize>, f64>> {
    let ent = refined.macro_mesh().entities();
    let interior: Vec<&crate::mesh::FacetEntity> = ent.facets.iter().filter(|f| !f.boundary).collect();
    let n = refined.num_cells();
    let mut g = DenseMatrix::zeros(n, interior.len());
    for (j, f) in interior.iter().enumerate() {
        g[(f.cells[0].0, j)] += 1.0;
        g[(f.cells[1].0, j)] -= 1.0;
    }
    let x = crate::linalg::least_squares(g.as_ref(), target)?;
    let r = &g * col(&x);
    let scale = target.iter().fold(0.0_f64, |a, t| a.max(t.abs())).max(f64::MIN_POSITIVE);
    if (0..n).any(|i| (r[(i, 0)] - target[i]).abs() > 1e-10 * scale) {
        return Err(Error::FluxSystemSingular);
    }
    Ok(interior.iter().zip(x).map(|(f, v)| (f.vertices.clone(), v)).collect())
}

/// Constructs `v` in the velocity space of `pair` with `div v = p`, for the
/// bubble pairs `mf-p0` (macro constants) and `vdiv-wr` (continuous
/// piecewise linears).
pub fn surjectivity_solve(pair: &StokesPair, p: &[f64]) -> Result<SurjectivityReport> {
    let (vel, pres) = (&pair.velocity, &pair.pressure);
    if p.len() != pres.ndofs {
        return Err(Error::DimensionMismatch(format!("{} pressure coefficients for {} dofs", p.len(), pres.ndofs)));
    }
    let ops = assemble(vel, pres)?;
    let ones = pres.constant.clone().ok_or(Error::EmptyPressureSpace)?;
    let mp = ops.m_p.matvec(p);
    let total: f64 = mp.iter().zip(&ones).map(|(a, b)| a * b).sum();
    let vol = refined_volume(&pres.refined);
    let pn = p.iter().zip(&mp).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt();
    if total.abs() > 1e-12 * (pn * vol.sqrt()).max(f64::MIN_POSITIVE) {
        return Err(Error::MeanNotZero(total / vol));
    }
    // cell integrals of p
    let mut cell_int = vec![0.0; pres.cells.len()];
    let deg = pres.degree.max(1);
    for (c, slot) in cell_int.iter_mut().enumerate() {
        let t = CellTab::new(pres, c, deg, false)?;
        for (i, ch) in t.children.iter().enumerate() {
            for (q, &w) in ch.weights.iter().enumerate() {
                *slot += w * t.dofs.iter().enumerate().map(|(f, &g)| p[g] * t.values[f][i][q]).sum::<f64>();
            }
        }
    }
    let fluxes = flux_balance(&vel.refined, &cell_int)?;
    let mut v = vec![0.0; vel.ndofs];
    let pidx = pres.dofmap.index();
    for (g, (_, key)) in vel.dofmap.keys.iter().enumerate() {
        match (pair.kind, key) {
            (_, DofKey::FaceFlux { facet }) => v[g] = fluxes[facet],
            (PairKind::VdivWr, DofKey::VertexDiv { vertex }) => {
                let node = DofKey::Node { support: vec![(*vertex, 1)], owner: None, comp: 0 };
                v[g] = p[pidx[&(0, node)]];
            }
            _ => return Err(Error::UnsupportedKind(format!("surjectivity construction for {}", pair.kind))),
        }
    }
    if !matches!(pair.kind, PairKind::MfP0 | PairKind::VdivWr) {
        return Err(Error::UnsupportedKind(format!("surjectivity construction for {}", pair.kind)));
    }
    let (residual, p_norm) = divergence_mismatch(vel, &v, pres, p)?;
    let mut vertex_mismatch: f64 = 0.0;
    if pair.kind == PairKind::VdivWr {
        let mesh = pres.refined.macro_mesh();
        for c in 0..mesh.num_cells() {
            let ls = crate::poly::LambdaSystem::<f64>::from_refined(&pres.refined, c)?;
            let dv = vel.local_function(c, &v);
            let div = ls.divergence(&dv)?;
            let pl = pres.local_function(c, p);
            for j in 0..=ls.d {
                let x = mesh.vertices()[mesh.cells()[c].vertices[j]].clone();
                vertex_mismatch = vertex_mismatch.max((ls.eval(&div, &x) - ls.eval(&pl[0], &x)).abs());
            }
        }
    }
    Ok(SurjectivityReport { velocity: v, residual, p_norm, vertex_mismatch })
}

fn refined_volume(r: &RefinedMesh) -> f64 {
    r.macro_mesh().total_volume()
}

/// Local `β` of `P̊ₖᶜ(Kʳ)`–`P̊ₖ₋₁(Kʳ)` on one split simplex.
pub fn local_infsup_constant(points: &[Vec<f64>], split_point: &[f64], k: usize) -> Result<f64> {
    let d = split_point.len();
    let mesh = crate::mesh::MacroMesh::new(points.to_vec(), vec![(0..=d).collect()])?;
    let refined = Arc::new(RefinedMesh::new(&mesh, crate::mesh::SplitRule::Explicit(vec![split_point.to_vec()]))?);
    let pair = build_pair(PairKind::PkPk1r, &refined, k)?;
    Ok(infsup_constant(&pair, 0, InfSupMethod::Svd)?.beta_h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{uniform_refine, unit_square, MacroMesh, SplitRule};
    use crate::space::direct_sum;
    use crate::space::{macro_element, Family};
    use rand::Rng;

    fn split(m: &MacroMesh) -> Arc<RefinedMesh> {
        Arc::new(RefinedMesh::new(m, SplitRule::Barycenter).unwrap())
    }

    fn beta(kind: PairKind, r: &Arc<RefinedMesh>, k: usize, method: InfSupMethod) -> f64 {
        infsup_constant(&build_pair(kind, r, k).unwrap(), 0, method).unwrap().beta_h
    }

    #[test]
    fn low_order_macro_pair_is_stable() {
        let r = split(&uniform_refine(&unit_square(1)).unwrap());
        assert!(beta(PairKind::Cor52, &r, 1, InfSupMethod::Auto) > 1e-3);
    }

    #[test]
    fn routes_agree() {
        let r = split(&unit_square(2));
        for (kind, k) in [(PairKind::Cor52, 1), (PairKind::PkPk1r, 2), (PairKind::Cor68, 1)] {
            let a = beta(kind, &r, k, InfSupMethod::Svd);
            let b = beta(kind, &r, k, InfSupMethod::Schur);
            assert!((a - b).abs() < 1e-6 * a.max(1.0), "{kind}: {a} {b}");
        }
    }

    #[test]
    fn dense_eigen_oracle() {
        // β² is the smallest eigenvalue of the deflated Schur pencil, formed
        // here with plain dense inverses
        let r = split(&unit_square(2));
        let pair = build_pair(PairKind::Cor52, &r, 1).unwrap();
        let ops = assemble(&pair.velocity, &pair.pressure).unwrap();
        let b = ops.b.to_dense();
        let mu_inv = faer::linalg::solvers::DenseSolveCore::inverse(&ops.m_u.to_dense().partial_piv_lu());
        let s = &b * &mu_inv * b.transpose();
        let mp = ops.m_p.to_dense();
        // mean-free basis: differences of pressures weighted by cell volumes
        let n = mp.nrows();
        let w: Vec<f64> = (0..n).map(|i| (0..n).map(|j| mp[(i, j)]).sum()).collect();
        let z = DenseMatrix::from_fn(n, n - 1, |i, j| if i == j { 1.0 / w[j] } else if i == n - 1 { -1.0 / w[n - 1] } else { 0.0 });
        let sz = z.transpose() * &s * &z;
        let mz = z.transpose() * &mp * &z;
        let e = crate::linalg::generalized_symmetric_eig(sz.as_ref(), mz.as_ref()).unwrap();
        let want = e[0].sqrt();
        let got = beta(PairKind::Cor52, &r, 1, InfSupMethod::Svd);
        assert!((want - got).abs() < 1e-8, "{want} {got}");
    }

    #[test]
    fn rigid_motion_and_permutation_invariance() {
        let m = unit_square(2);
        let (c, s) = (0.6_f64, 0.8_f64);
        let moved = m.transformed(&[vec![c, -s], vec![s, c]], &[3.0, -1.5]);
        let a = beta(PairKind::PkPk1r, &split(&m), 2, InfSupMethod::Svd);
        let b = beta(PairKind::PkPk1r, &split(&moved), 2, InfSupMethod::Svd);
        assert!((a - b).abs() < 1e-9 * a);
        let pair = build_pair(PairKind::PkPk1r, &split(&m), 2).unwrap();
        let ops = assemble(&pair.velocity, &pair.pressure).unwrap();
        let nu = ops.a.nrows;
        let np = ops.m_p.nrows;
        let pu: Vec<usize> = (0..nu).map(|i| (i * 7 + 3) % nu).collect();
        let pp: Vec<usize> = (0..np).rev().collect();
        assert_eq!(nu % 7 == 0, false);
        let ops2 = AssembledOperators {
            a: ops.a.permuted(&pu, &pu),
            m_u: ops.m_u.permuted(&pu, &pu),
            b: ops.b.permuted(&pp, &pu),
            m_p: ops.m_p.permuted(&pp, &pp),
            quadrature_degree: ops.quadrature_degree,
        };
        let ones = vec![1.0; np];
        let c = infsup_from_operators(&ops2, &ones, InfSupMethod::Svd).unwrap().0;
        assert!((a - c).abs() < 1e-9 * a);
    }

    #[test]
    fn equivalence_on_squares() {
        let r = split(&unit_square(2));
        let e = equivalence_check(&r, 2).unwrap();
        assert!(e.refined_stable && e.macro_stable, "{e:?}");
        let e = equivalence_check(&r, 1).unwrap();
        assert!(!e.refined_stable && !e.macro_stable, "{e:?}");
    }

    #[test]
    fn bootstrap_paths() {
        let r = split(&unit_square(2));
        let d = 2;
        let pk = lagrange(&r, Level::Refined, 1, true, d, true).unwrap();
        let mf = macro_element(&r, Family::Mf, true).unwrap();
        let v = direct_sum("sum", &[&pk, &mf]).unwrap();
        let rep = bootstrap_check(&v, 1).unwrap();
        assert!(rep.consistent && rep.beta_macro.unwrap() > 1e-3 && rep.beta_refined.unwrap() > 1e-3, "{rep:?}");
        let macro_p1 = lagrange(&r, Level::Macro, 1, true, d, true).unwrap();
        assert!(matches!(bootstrap_check(&macro_p1, 1), Err(Error::HypothesisViolated(_))));
    }

    #[test]
    fn surjectivity_two_triangles() {
        let r = split(&unit_square(1));
        let pair = build_pair(PairKind::MfP0, &r, 1).unwrap();
        let zero = surjectivity_solve(&pair, &[0.0, 0.0]).unwrap();
        assert!(zero.velocity.iter().all(|x| *x == 0.0));
        let rep = surjectivity_solve(&pair, &[2.0, -2.0]).unwrap();
        assert!(rep.residual < 1e-10 * rep.p_norm);
        assert!(matches!(surjectivity_solve(&pair, &[1.0, 0.0]), Err(Error::MeanNotZero(_))));
    }

    #[test]
    fn surjectivity_onto_continuous_linears() {
        let r = split(&unit_square(1));
        let pair = build_pair(PairKind::VdivWr, &r, 1).unwrap();
        let mut g = crate::rng::rng(11, 0);
        let mut p: Vec<f64> = (0..pair.pressure.ndofs).map(|_| g.random_range(-1.0..1.0)).collect();
        // remove the mean
        let ops = assemble(&pair.velocity, &pair.pressure).unwrap();
        let ones = vec![1.0; p.len()];
        let mp1 = ops.m_p.matvec(&ones);
        let mean = p.iter().zip(&mp1).map(|(a, b)| a * b).sum::<f64>() / mp1.iter().sum::<f64>();
        for x in p.iter_mut() {
            *x -= mean;
        }
        let rep = surjectivity_solve(&pair, &p).unwrap();
        assert!(rep.residual < 1e-10 * rep.p_norm, "{rep:?}");
        assert!(rep.vertex_mismatch < 1e-10);
    }

    #[test]
    fn local_constant_positive() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(local_infsup_constant(&pts, &[1.0 / 3.0, 1.0 / 3.0], 1).unwrap() > 1e-3);
    }
}
