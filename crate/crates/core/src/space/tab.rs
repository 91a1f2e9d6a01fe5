//! Values and gradients of a space's local fields at quadrature points.

use super::FeSpace;
use crate::error::Result;
use crate::poly::{monomials, quadrature, BaryPoly, LambdaSystem};

#[derive(Debug, Clone)]
pub struct ChildTab {
    /// Quadrature weights times the child volume.
    pub weights: Vec<f64>,
    /// Physical quadrature points.
    pub points: Vec<Vec<f64>>,
}

/// Tabulation of the fields of one macro cell.
#[derive(Debug, Clone)]
pub struct CellTab {
    pub children: Vec<ChildTab>,
    pub dofs: Vec<usize>,
    /// `values[f][i][q * ncomp + r]`.
    pub values: Vec<Vec<Vec<f64>>>,
    /// `grads[f][i][(q * ncomp + r) * d + s]`, empty unless requested.
    pub grads: Vec<Vec<Vec<f64>>>,
    pub ncomp: usize,
    pub dim: usize,
}

/// Monomial values and their partial derivatives at one point.
struct MonoTable {
    vals: Vec<f64>,
    ders: Vec<Vec<f64>>,
}

fn mono_table(n: usize, k: usize, lam: &[f64]) -> MonoTable {
    let table = monomials(n, k);
    let pow = |x: f64, e: u32| if e == 0 { 1.0 } else { x.powi(e as i32) };
    let vals = table.iter().map(|a| a.iter().zip(lam).map(|(&e, &x)| pow(x, e)).product()).collect();
    let ders = (0..n)
        .map(|s| {
            table
                .iter()
                .map(|a| {
                    if a[s] == 0 {
                        return 0.0;
                    }
                    let mut p = a[s] as f64;
                    for (t, (&e, &x)) in a.iter().zip(lam).enumerate() {
                        p *= pow(x, if t == s { e - 1 } else { e });
                    }
                    p
                })
                .collect()
        })
        .collect();
    MonoTable { vals, ders }
}

fn dot(p: &BaryPoly<f64>, v: &[f64]) -> f64 {
    p.coeffs().iter().zip(v).map(|(a, b)| a * b).sum()
}

impl CellTab {
    pub fn new(space: &FeSpace, c: usize, degree: usize, with_grads: bool) -> Result<Self> {
        let ls = LambdaSystem::<f64>::from_refined(&space.refined, c)?;
        Self::with_system(space, &ls, c, degree, with_grads)
    }

    pub fn with_system(space: &FeSpace, ls: &LambdaSystem<f64>, c: usize, degree: usize, with_grads: bool) -> Result<Self> {
        let d = ls.d;
        let rule = quadrature(d, degree)?;
        let nc = space.ncomp;
        let fields = &space.cells[c];
        let k = space.degree;
        let mut children = Vec::with_capacity(d + 1);
        let mut values = vec![Vec::with_capacity(d + 1); fields.len()];
        let mut grads = vec![Vec::with_capacity(d + 1); fields.len()];
        for i in 0..=d {
            let pts = &ls.child_points[i];
            let vol = ls.child_volumes[i];
            let points: Vec<Vec<f64>> = rule.points.iter().map(|lam| (0..d).map(|r| lam.iter().zip(pts).map(|(l, p)| l * p[r]).sum()).collect()).collect();
            let tabs: Vec<MonoTable> = rule.points.iter().map(|lam| mono_table(d + 1, k, lam)).collect();
            let nq = tabs.len();
            let g = &ls.child_grads[i];
            for (f, fld) in fields.iter().enumerate() {
                let mut v = vec![0.0; nq * nc];
                let mut gr = if with_grads { vec![0.0; nq * nc * d] } else { Vec::new() };
                for (r, comp) in fld.comps.iter().enumerate() {
                    let piece = &comp.pieces[i];
                    if piece.is_zero() {
                        continue;
                    }
                    for (q, t) in tabs.iter().enumerate() {
                        v[q * nc + r] = dot(piece, &t.vals);
                        if with_grads {
                            for (s, ds) in t.ders.iter().enumerate() {
                                let a = dot(piece, ds);
                                if a == 0.0 {
                                    continue;
                                }
                                for x in 0..d {
                                    gr[(q * nc + r) * d + x] += a * g[s][x];
                                }
                            }
                        }
                    }
                }
                values[f].push(v);
                grads[f].push(gr);
            }
            children.push(ChildTab { weights: rule.weights.iter().map(|w| w * vol).collect(), points });
        }
        Ok(CellTab { children, dofs: fields.iter().map(|f| f.dof).collect(), values, grads, ncomp: nc, dim: d })
    }

    /// Divergence of field `f` at point `q` of child `i`.
    pub fn div(&self, f: usize, i: usize, q: usize) -> f64 {
        let (nc, d) = (self.ncomp, self.dim);
        (0..d).map(|r| self.grads[f][i][(q * nc + r) * d + r]).sum()
    }
}
