//! Simplex quadrature by collapsed (Duffy) tensor products of Gauss–Legendre
//! rules. All weights are positive and sum to one.

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

pub const MAX_QUADRATURE_DEGREE: usize = 20;

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub dim: usize,
    pub degree_exact: usize,
    /// Barycentric coordinates (`dim + 1` entries each).
    pub points: Vec<Vec<f64>>,
    /// Weights relative to the simplex measure.
    pub weights: Vec<f64>,
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn build(d: usize, degree: usize) -> QuadratureRule {
    let n = (degree + d).div_ceil(2).max(1);
    let (gx, gw) = gauss_legendre(n);
    let total = n.pow(d as u32);
    let mut points = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    let dfact: f64 = (1..=d).map(|k| k as f64).product();
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        let mut x = vec![0.0; d];
        let mut rest = 1.0;
        let mut w = dfact;
        for i in 0..d {
            let u = gx[idx[i]];
            x[i] = rest * u;
            w *= gw[idx[i]];
            w *= (1.0 - u).powi((d - 1 - i) as i32);
            rest *= 1.0 - u;
        }
        let mut lam = Vec::with_capacity(d + 1);
        lam.push(1.0 - x.iter().sum::<f64>());
        lam.extend(x);
        points.push(lam);
        weights.push(w);
        for i in (0..d).rev() {
            idx[i] += 1;
            if idx[i] < n {
                break;
            }
            idx[i] = 0;
        }
    }
    QuadratureRule { dim: d, degree_exact: degree, points, weights }
}

/// A rule on the `d`-simplex exact for polynomials of total degree `degree`.
pub fn quadrature(d: usize, degree: usize) -> Result<Arc<QuadratureRule>> {
    if degree > MAX_QUADRATURE_DEGREE {
        return Err(Error::UnsupportedDegree(degree));
    }
    if d == 0 {
        return Err(Error::DimensionRule("quadrature needs d ≥ 1".into()));
    }
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<QuadratureRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache");
    Ok(guard.entry((d, degree)).or_insert_with(|| Arc::new(build(d, degree))).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{monomials, BaryPoly};

    #[test]
    fn weights_sum_to_one() {
        for d in 1..=4 {
            let q = quadrature(d, 5).unwrap();
            assert!((q.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(q.weights.iter().all(|w| *w > 0.0));
        }
    }

    #[test]
    fn x_over_unit_triangle() {
        let q = quadrature(2, 1).unwrap();
        let v: f64 = q.points.iter().zip(&q.weights).map(|(p, w)| w * p[1]).sum();
        assert!((0.5 * v - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn exact_against_monomial_formula() {
        for d in 1..=4 {
            let top = if d <= 2 { 12 } else { 8 };
            for k in 0..=top {
                let q = quadrature(d, k).unwrap();
                for a in monomials(d + 1, k).iter() {
                    let p = BaryPoly::<f64>::monomial(a, 1.0);
                    let exact = p.integrate(&1.0);
                    let approx: f64 = q.points.iter().zip(&q.weights).map(|(x, w)| w * p.eval_f64(x)).sum();
                    assert!((approx - exact).abs() <= 1e-13 * exact, "d={d} k={k} {a:?}");
                }
            }
        }
    }

    #[test]
    fn cap_is_enforced() {
        assert_eq!(quadrature(2, 21).unwrap_err(), Error::UnsupportedDegree(21));
    }
}
