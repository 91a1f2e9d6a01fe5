//! Discrete Stokes solves with manufactured solutions.

use crate::error::{Error, Result};
use crate::linalg::{sparse_lu_solve, SparseMatrix};
use crate::mesh::{MacroMesh, RefinedMesh, SplitRule};
use crate::space::{assemble, build_pair, CellTab, FeSpace, PairKind, StokesPair};
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseKind {
    /// `u = 0`, `p = 0`, `f = 0`.
    Zero,
    /// `u = curl φ` with `φ = g(x)g(y)` in 2D or the curl of `(φ, φ, φ)`
    /// with `φ = g(x)g(y)g(z)` in 3D, `g(t) = t²(1−t)²`; `p = x − ½`.
    Curl,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManufacturedCase {
    pub d: usize,
    pub kind: CaseKind,
    /// The solution is `u(x − shift)`, `p(x − shift)`.
    pub shift: Vec<f64>,
    /// Pressure multiplier: `p = (1 + boost)(x − ½)`.
    pub pressure_boost: f64,
}

/// `g⁽ⁿ⁾(t)` for `g = t² − 2t³ + t⁴`.
fn g(n: usize, t: f64) -> f64 {
    match n {
        0 => t * t * (1.0 - t) * (1.0 - t),
        1 => 2.0 * t - 6.0 * t * t + 4.0 * t * t * t,
        2 => 2.0 - 12.0 * t + 12.0 * t * t,
        3 => -12.0 + 24.0 * t,
        4 => 24.0,
        _ => 0.0,
    }
}

impl ManufacturedCase {
    pub fn new(d: usize, kind: CaseKind) -> Result<Self> {
        if kind == CaseKind::Curl && !(d == 2 || d == 3) {
            return Err(Error::DimensionRule("the curl case needs d = 2 or 3".into()));
        }
        Ok(ManufacturedCase { d, kind, shift: vec![0.0; d], pressure_boost: 0.0 })
    }

    pub fn translated(&self, shift: &[f64]) -> Self {
        ManufacturedCase { shift: self.shift.iter().zip(shift).map(|(a, b)| a + b).collect(), ..self.clone() }
    }

    pub fn with_pressure_boost(&self, boost: f64) -> Self {
        ManufacturedCase { pressure_boost: boost, ..self.clone() }
    }

    /// Velocity components as signed derivatives of `φ`.
    fn terms(&self) -> Vec<Vec<(f64, Vec<usize>)>> {
        let e = |i: usize| -> Vec<usize> { (0..self.d).map(|r| usize::from(r == i)).collect() };
        match self.d {
            2 => vec![vec![(1.0, e(1))], vec![(-1.0, e(0))]],
            _ => vec![vec![(1.0, e(1)), (-1.0, e(2))], vec![(1.0, e(2)), (-1.0, e(0))], vec![(1.0, e(0)), (-1.0, e(1))]],
        }
    }

    fn phi(&self, x: &[f64], a: &[usize]) -> f64 {
        a.iter().enumerate().map(|(r, &n)| g(n, x[r] - self.shift[r])).product()
    }

    /// `∂^extra u_r`.
    fn du(&self, x: &[f64], r: usize, extra: &[usize]) -> f64 {
        if self.kind == CaseKind::Zero {
            return 0.0;
        }
        self.terms()[r].iter().map(|(s, a)| s * self.phi(x, &a.iter().zip(extra).map(|(p, q)| p + q).collect::<Vec<_>>())).sum()
    }

    fn unit(&self, s: usize, times: usize) -> Vec<usize> {
        (0..self.d).map(|r| if r == s { times } else { 0 }).collect()
    }

    pub fn velocity(&self, x: &[f64]) -> Vec<f64> {
        (0..self.d).map(|r| self.du(x, r, &vec![0; self.d])).collect()
    }

    /// `grad[r][s] = ∂_s u_r`.
    pub fn velocity_grad(&self, x: &[f64]) -> Vec<Vec<f64>> {
        (0..self.d).map(|r| (0..self.d).map(|s| self.du(x, r, &self.unit(s, 1))).collect()).collect()
    }

    pub fn pressure(&self, x: &[f64]) -> f64 {
        match self.kind {
            CaseKind::Zero => 0.0,
            CaseKind::Curl => (1.0 + self.pressure_boost) * (x[0] - self.shift[0] - 0.5),
        }
    }

    /// `f = −Δu + ∇p`.
    pub fn forcing(&self, x: &[f64]) -> Vec<f64> {
        if self.kind == CaseKind::Zero {
            return vec![0.0; self.d];
        }
        (0..self.d)
            .map(|r| {
                let lap: f64 = (0..self.d).map(|s| self.du(x, r, &self.unit(s, 2))).sum();
                -lap + if r == 0 { 1.0 + self.pressure_boost } else { 0.0 }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StokesErrors {
    pub l2_u: f64,
    pub h1_u: f64,
    pub l2_p: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StokesSolution {
    pub pair: String,
    pub n_u: usize,
    pub n_p: usize,
    pub h: f64,
    #[serde(skip)]
    pub velocity: Vec<f64>,
    #[serde(skip)]
    pub pressure: Vec<f64>,
    pub divergence_l2: f64,
    pub velocity_h1: f64,
    pub errors: StokesErrors,
    /// `|a(u,u) − b(u,p) − (f,u)| / max(|(f,u)|, a(u,u))`.
    pub energy_residual: f64,
}

fn forcing_vector(vel: &FeSpace, case: &ManufacturedCase, degree: usize) -> Result<Vec<f64>> {
    let parts: Vec<(Vec<usize>, Vec<f64>)> = (0..vel.cells.len())
        .into_par_iter()
        .map(|c| {
            let t = CellTab::new(vel, c, degree, false)?;
            let nc = t.ncomp;
            let mut loc = vec![0.0; t.dofs.len()];
            for (i, ch) in t.children.iter().enumerate() {
                for (q, (&w, x)) in ch.weights.iter().zip(&ch.points).enumerate() {
                    let f = case.forcing(x);
                    for (l, slot) in loc.iter_mut().enumerate() {
                        *slot += w * (0..nc).map(|r| f[r] * t.values[l][i][q * nc + r]).sum::<f64>();
                    }
                }
            }
            Ok((t.dofs, loc))
        })
        .collect::<Result<_>>()?;
    let mut out = vec![0.0; vel.ndofs];
    for (dofs, loc) in parts {
        for (g, v) in dofs.into_iter().zip(loc) {
            out[g] += v;
        }
    }
    Ok(out)
}

struct Measures {
    l2_u: f64,
    h1_u: f64,
    l2_p: f64,
    div: f64,
    uh_h1: f64,
}

fn measure(vel: &FeSpace, pres: &FeSpace, u: &[f64], p: &[f64], case: &ManufacturedCase, degree: usize) -> Result<Measures> {
    let parts: Vec<[f64; 6]> = (0..vel.cells.len())
        .into_par_iter()
        .map(|c| {
            let tv = CellTab::new(vel, c, degree, true)?;
            let tp = CellTab::new(pres, c, degree, false)?;
            let (nc, d) = (tv.ncomp, tv.dim);
            let mut acc = [0.0; 6];
            for (i, ch) in tv.children.iter().enumerate() {
                for (q, (&w, x)) in ch.weights.iter().zip(&ch.points).enumerate() {
                    let mut uh = vec![0.0; nc];
                    let mut gh = vec![0.0; nc * d];
                    for (f, &g) in tv.dofs.iter().enumerate() {
                        if u[g] == 0.0 {
                            continue;
                        }
                        for r in 0..nc {
                            uh[r] += u[g] * tv.values[f][i][q * nc + r];
                        }
                        for (k, slot) in gh.iter_mut().enumerate() {
                            *slot += u[g] * tv.grads[f][i][q * nc * d + k];
                        }
                    }
                    let ph: f64 = tp.dofs.iter().enumerate().map(|(f, &g)| p[g] * tp.values[f][i][q]).sum();
                    let ue = case.velocity(x);
                    let ge = case.velocity_grad(x);
                    let div: f64 = (0..d).map(|r| gh[r * d + r]).sum();
                    acc[0] += w * (0..nc).map(|r| (uh[r] - ue[r]).powi(2)).sum::<f64>();
                    acc[1] += w * (0..nc).flat_map(|r| (0..d).map(move |s| (r, s))).map(|(r, s)| (gh[r * d + s] - ge[r][s]).powi(2)).sum::<f64>();
                    acc[2] += w * (ph - case.pressure(x)).powi(2);
                    acc[3] += w * div * div;
                    acc[4] += w * (uh.iter().map(|v| v * v).sum::<f64>() + gh.iter().map(|v| v * v).sum::<f64>());
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let s = parts.iter().fold([0.0; 6], |mut a, b| {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
        a
    });
    Ok(Measures { l2_u: s[0].sqrt(), h1_u: s[1].sqrt(), l2_p: s[2].sqrt(), div: s[3].sqrt(), uh_h1: s[4].sqrt() })
}

/// Solves `[[A, −Bᵀ, 0], [−B, 0, m], [0, mᵀ, 0]]` with `m = M_p 1`, the
/// last row imposing a mean-free pressure.
///
/// Since `Bᵀ1 = 0` the multiplier of the mean constraint vanishes, so the
/// system is factored with one pressure DOF pinned instead (a dense border
/// row destroys the fill of a column-ordered sparse LU); the pressure is
/// then shifted to zero mean and the residual is checked against the full
/// bordered system.
pub fn solve_stokes(pair: &StokesPair, case: &ManufacturedCase) -> Result<StokesSolution> {
    let (vel, pres) = (&pair.velocity, &pair.pressure);
    if case.d != vel.dim() {
        return Err(Error::DimensionMismatch(format!("case in dimension {} on a mesh of dimension {}", case.d, vel.dim())));
    }
    if vel.ndofs == 0 {
        return Err(Error::EmptyVelocitySpace);
    }
    let ops = assemble(vel, pres)?;
    let (nu, np) = (vel.ndofs, pres.ndofs);
    let ones = pres.constant.clone().ok_or(Error::EmptyPressureSpace)?;
    let m = ops.m_p.matvec(&ones);
    let n = nu + np + 1;
    let mut full = SparseMatrix::new(n, n);
    for (i, j, v) in ops.a.iter() {
        full.add(i, j, v);
    }
    for (i, j, v) in ops.b.iter() {
        full.add(j, nu + i, -v);
        full.add(nu + i, j, -v);
    }
    for (i, &v) in m.iter().enumerate() {
        full.add(nu + i, nu + np, v);
        full.add(nu + np, nu + i, v);
    }
    let pin = (0..np).max_by(|&a, &b| ones[a].abs().total_cmp(&ones[b].abs())).ok_or(Error::EmptyPressureSpace)?;
    // reduced unknowns: u, then p without the pinned entry
    let slot = |i: usize| if i < pin { nu + i } else { nu + i - 1 };
    let mut k = SparseMatrix::new(n - 2, n - 2);
    for (i, j, v) in full.iter() {
        if i < nu + np && j < nu + np && i != nu + pin && j != nu + pin {
            k.add(if i < nu { i } else { slot(i - nu) }, if j < nu { j } else { slot(j - nu) }, v);
        }
    }
    let deg = vel.degree;
    let f = forcing_vector(vel, case, (2 * deg + 4).min(crate::poly::MAX_QUADRATURE_DEGREE))?;
    let mut rhs = f.clone();
    rhs.resize(n - 2, 0.0);
    let y = sparse_lu_solve(&k, &rhs)?;
    let u = y[..nu].to_vec();
    let mut p: Vec<f64> = (0..np).map(|i| if i == pin { 0.0 } else { y[slot(i)] }).collect();
    let mean = p.iter().zip(&m).map(|(a, b)| a * b).sum::<f64>() / ones.iter().zip(&m).map(|(a, b)| a * b).sum::<f64>();
    for (pi, ci) in p.iter_mut().zip(&ones) {
        *pi -= mean * ci;
    }
    let mut x = u.clone();
    x.extend_from_slice(&p);
    x.push(0.0);
    let mut b = f.clone();
    b.resize(n, 0.0);
    let r: f64 = full.matvec(&x).iter().zip(&b).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
    let scale = full.max_abs() * x.iter().map(|v| v * v).sum::<f64>().sqrt() + b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(r <= 1e-9 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::SolverFailure(format!("bordered residual {r:e}")));
    }
    let meas = measure(vel, pres, &u, &p, case, (2 * deg + 2).min(crate::poly::MAX_QUADRATURE_DEGREE))?;
    let au: f64 = ops.a.matvec(&u).iter().zip(&u).map(|(a, b)| a * b).sum();
    let bup: f64 = ops.b.matvec(&u).iter().zip(&p).map(|(a, b)| a * b).sum();
    let fu: f64 = f.iter().zip(&u).map(|(a, b)| a * b).sum();
    let energy_residual = if au == 0.0 && fu == 0.0 { 0.0 } else { (au - bup - fu).abs() / fu.abs().max(au) };
    Ok(StokesSolution {
        pair: pair.kind.name().to_string(),
        n_u: nu,
        n_p: np,
        h: vel.refined.macro_mesh().h_max(),
        velocity: u,
        pressure: p,
        divergence_l2: meas.div,
        velocity_h1: meas.uh_h1,
        errors: StokesErrors { l2_u: meas.l2_u, h1_u: meas.h1_u, l2_p: meas.l2_p },
        energy_residual,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub n_u: usize,
    pub n_p: usize,
    pub errors: StokesErrors,
    pub divergence_l2: f64,
    /// Rates against the previous level (`None` on the first).
    pub rate_l2_u: Option<f64>,
    pub rate_h1_u: Option<f64>,
    pub rate_l2_p: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub pair: String,
    pub k: usize,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// H¹ velocity rate between the two finest levels.
    pub fn finest_h1_rate(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.rate_h1_u)
    }
}

pub fn convergence_study(kind: PairKind, k: usize, case: &ManufacturedCase, meshes: &[MacroMesh]) -> Result<ConvergenceTable> {
    if meshes.len() < 3 {
        return Err(Error::DimensionRule("at least 3 levels for a convergence study".into()));
    }
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for (level, m) in meshes.iter().enumerate() {
        let r = Arc::new(RefinedMesh::new(m, SplitRule::Barycenter)?);
        let pair = build_pair(kind, &r, k)?;
        let s = solve_stokes(&pair, case)?;
        let rate = |a: f64, b: f64, ha: f64, hb: f64| (a / b).ln() / (ha / hb).ln();
        let prev = rows.last();
        rows.push(ConvergenceRow {
            level,
            h: s.h,
            n_u: s.n_u,
            n_p: s.n_p,
            errors: s.errors,
            divergence_l2: s.divergence_l2,
            rate_l2_u: prev.map(|p| rate(p.errors.l2_u, s.errors.l2_u, p.h, s.h)),
            rate_h1_u: prev.map(|p| rate(p.errors.h1_u, s.errors.h1_u, p.h, s.h)),
            rate_l2_p: prev.map(|p| rate(p.errors.l2_p, s.errors.l2_p, p.h, s.h)),
        });
    }
    Ok(ConvergenceTable { pair: kind.name().to_string(), k, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{cube_kuhn, unit_square};

    fn split(m: &MacroMesh) -> Arc<RefinedMesh> {
        Arc::new(RefinedMesh::new(m, SplitRule::Barycenter).unwrap())
    }

    #[test]
    fn case_is_divergence_free_and_consistent() {
        // finite-difference oracle for the forcing
        for d in [2, 3] {
            let c = ManufacturedCase::new(d, CaseKind::Curl).unwrap();
            let x: Vec<f64> = (0..d).map(|r| 0.3 + 0.17 * r as f64).collect();
            let gr = c.velocity_grad(&x);
            assert!((0..d).map(|r| gr[r][r]).sum::<f64>().abs() < 1e-15);
            let h = 1e-3;
            for r in 0..d {
                let mut lap = 0.0;
                for s in 0..d {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[s] += h;
                    xm[s] -= h;
                    lap += (c.velocity(&xp)[r] - 2.0 * c.velocity(&x)[r] + c.velocity(&xm)[r]) / (h * h);
                }
                let want = -lap + if r == 0 { 1.0 } else { 0.0 };
                assert!((c.forcing(&x)[r] - want).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn zero_data_zero_solution() {
        let pair = build_pair(PairKind::Cor52, &split(&unit_square(2)), 1).unwrap();
        let s = solve_stokes(&pair, &ManufacturedCase::new(2, CaseKind::Zero).unwrap()).unwrap();
        assert!(s.velocity.iter().chain(&s.pressure).all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn divergence_free_solutions_2d() {
        let r = split(&unit_square(4));
        let case = ManufacturedCase::new(2, CaseKind::Curl).unwrap();
        for (kind, k) in [(PairKind::Cor52, 1), (PairKind::PkPk1r, 2), (PairKind::Cor64, 1), (PairKind::Cor68, 1), (PairKind::VrWr, 1)] {
            let s = solve_stokes(&build_pair(kind, &r, k).unwrap(), &case).unwrap();
            assert!(s.divergence_l2 <= 1e-10 * s.velocity_h1.max(1.0), "{kind}: {}", s.divergence_l2);
            assert!(s.energy_residual < 1e-9, "{kind}: {}", s.energy_residual);
        }
    }

    #[test]
    fn divergence_free_solution_3d() {
        let r = split(&cube_kuhn(1));
        let case = ManufacturedCase::new(3, CaseKind::Curl).unwrap();
        let s = solve_stokes(&build_pair(PairKind::Cor52, &r, 1).unwrap(), &case).unwrap();
        assert!(s.divergence_l2 <= 1e-10 * s.velocity_h1.max(1.0));
    }

    #[test]
    fn pressure_robust_and_translation_invariant() {
        let m = unit_square(4);
        let case = ManufacturedCase::new(2, CaseKind::Curl).unwrap();
        let pair = build_pair(PairKind::PkPk1r, &split(&m), 2).unwrap();
        let a = solve_stokes(&pair, &case).unwrap();
        let b = solve_stokes(&pair, &case.with_pressure_boost(1e3)).unwrap();
        let diff = a.velocity.iter().zip(&b.velocity).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let norm = a.velocity.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(diff <= 1e-8 * norm, "{}", diff / norm);
        let shift = [2.5, -1.25];
        let moved = build_pair(PairKind::PkPk1r, &split(&m.translated(&shift)), 2).unwrap();
        let c = solve_stokes(&moved, &case.translated(&shift)).unwrap();
        let diff = a.velocity.iter().zip(&c.velocity).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(diff <= 1e-9 * norm, "{}", diff / norm);
    }
}
