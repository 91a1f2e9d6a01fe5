//! Coefficient field abstraction so the polynomial calculus and the local
//! divergence solver can run either in `f64` or in exact rationals.

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// True when arithmetic is exact; tolerances collapse to zero.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    /// Exact conversion for rationals (every finite `f64` is a dyadic rational).
    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn is_zero(&self) -> bool;

    fn abs_f64(&self) -> f64 {
        self.to_f64().abs()
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
}

pub type Rational = BigRational;

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn zero() -> Self {
        <BigRational as Zero>::zero()
    }
    fn one() -> Self {
        <BigRational as One>::one()
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn from_f64(v: f64) -> Self {
        BigRational::from_float(v).expect("finite coordinate")
    }
    fn to_f64(&self) -> f64 {
        // Scale down huge numerators/denominators before converting.
        match (self.numer().to_f64(), self.denom().to_f64()) {
            (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
            _ => {
                let shift = self.numer().bits().max(self.denom().bits()).saturating_sub(900);
                let n = (self.numer() >> shift).to_f64().unwrap_or(0.0);
                let d = (self.denom() >> shift).to_f64().unwrap_or(1.0);
                n / d
            }
        }
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn abs_f64(&self) -> f64 {
        ToPrimitive::to_f64(&self.abs()).unwrap_or(f64::INFINITY)
    }
}

/// Returns true when exact rational mode was requested via `ALFELD_RATIONAL=1`.
pub fn rational_mode_requested() -> bool {
    std::env::var("ALFELD_RATIONAL").map(|v| v == "1").unwrap_or(false)
}

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting on magnitude. Returns `None` when a pivot vanishes (exact) or is
/// below `1e-14` times the largest entry (floating point).
pub fn gauss_solve<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    let scale = a
        .iter()
        .flat_map(|r| r.iter().map(|v| v.abs_f64()))
        .fold(0.0_f64, f64::max);
    for col in 0..n {
        let (piv, pmag) = (col..n)
            .map(|r| (r, a[r][col].abs_f64()))
            .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if a[piv][col].is_zero() || (!T::EXACT && pmag <= 1e-14 * scale) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let pivot = a[col][col].clone();
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone() / pivot.clone();
            for c in col..n {
                let t = a[col][c].clone() * f.clone();
                a[r][c] = a[r][c].clone() - t;
            }
            let t = b[col].clone() * f;
            b[r] = b[r].clone() - t;
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let mut acc = b[r].clone();
        for c in r + 1..n {
            acc = acc - a[r][c].clone() * x[c].clone();
        }
        x[r] = acc / a[r][r].clone();
    }
    Some(x)
}

/// Minimal Euclidean-norm solution of the full-row-rank system `g s = r`
/// (`g` is `m × n`, `m ≤ n`), computed as `s = gᵀ (g gᵀ)⁻¹ r`.
pub fn min_norm_solve<T: Scalar>(g: &[Vec<T>], r: &[T], n: usize) -> Option<Vec<T>> {
    let m = g.len();
    if m == 0 {
        return Some(vec![T::zero(); n]);
    }
    let mut gram = vec![vec![T::zero(); m]; m];
    for i in 0..m {
        for j in 0..m {
            let mut acc = T::zero();
            for k in 0..n {
                acc = acc + g[i][k].clone() * g[j][k].clone();
            }
            gram[i][j] = acc;
        }
    }
    let y = gauss_solve(gram, r.to_vec())?;
    let mut s = vec![T::zero(); n];
    for (i, yi) in y.iter().enumerate() {
        for k in 0..n {
            s[k] = s[k].clone() + g[i][k].clone() * yi.clone();
        }
    }
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_solves_small_system() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = gauss_solve(a, vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn rational_solve_is_exact() {
        let q = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        let a = vec![vec![q(1, 3), q(1, 2)], vec![q(2, 5), q(-1, 7)]];
        let x = gauss_solve(a.clone(), vec![q(1, 1), q(0, 1)]).unwrap();
        let r0 = a[0][0].clone() * x[0].clone() + a[0][1].clone() * x[1].clone();
        assert_eq!(r0, q(1, 1));
    }

    #[test]
    fn min_norm_is_orthogonal_to_null_space() {
        // one equation in 3 unknowns: null space is ⊥ to the row
        let g = vec![vec![1.0, 2.0, 2.0]];
        let s = min_norm_solve(&g, &[9.0], 3).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-14 && (s[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn singular_returns_none() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(gauss_solve(a, vec![1.0, 1.0]).is_none());
    }
}
