//! Polynomials in homogeneous barycentric-monomial form.
//!
//! A [`BaryPoly`] of degree `k` in `n = d+1` barycentric variables is stored
//! as a dense coefficient vector over all monomials `λ^α` with `|α| = k`.
//! Lower-degree data is carried by multiplying with `Σλ = 1`.

pub mod multi;
pub mod quadrature;
mod split;

pub use multi::{count, monomials, rank, MultiIndex};
pub use quadrature::{quadrature, QuadratureRule, MAX_QUADRATURE_DEGREE};
pub use split::{Continuity, LambdaSystem, SplitPoly, VectorField};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct BaryPoly<T: Scalar> {
    nvars: usize,
    degree: usize,
    coeffs: Vec<T>,
}

fn factorial<T: Scalar>(n: usize) -> T {
    (2..=n).fold(T::one(), |acc, k| acc * T::from_i64(k as i64))
}

impl<T: Scalar> BaryPoly<T> {
    pub fn zero(nvars: usize, degree: usize) -> Self {
        BaryPoly { nvars, degree, coeffs: vec![T::zero(); count(nvars, degree)] }
    }

    pub fn constant(nvars: usize, c: T) -> Self {
        BaryPoly { nvars, degree: 0, coeffs: vec![c] }
    }

    /// The constant `c` written in degree `degree` (`c (Σλ)^degree`).
    pub fn constant_of_degree(nvars: usize, degree: usize, c: T) -> Self {
        Self::constant(nvars, c).elevate(degree)
    }

    pub fn monomial(alpha: &[u32], c: T) -> Self {
        let degree = alpha.iter().map(|&a| a as usize).sum();
        let mut p = Self::zero(alpha.len(), degree);
        p.coeffs[rank(alpha)] = c;
        p
    }

    /// The coordinate function `λ_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut a = vec![0; nvars];
        a[i] = 1;
        Self::monomial(&a, T::one())
    }

    pub fn linear(coeffs: Vec<T>) -> Self {
        BaryPoly { nvars: coeffs.len(), degree: 1, coeffs }
    }

    pub fn from_coeffs(nvars: usize, degree: usize, coeffs: Vec<T>) -> Result<Self> {
        if coeffs.len() != count(nvars, degree) {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} monomials",
                coeffs.len(),
                count(nvars, degree)
            )));
        }
        Ok(BaryPoly { nvars, degree, coeffs })
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }
    pub fn degree(&self) -> usize {
        self.degree
    }
    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }
    pub fn coeff(&self, alpha: &[u32]) -> T {
        self.coeffs[rank(alpha)].clone()
    }
    pub fn coeff_mut(&mut self, alpha: &[u32]) -> &mut T {
        &mut self.coeffs[rank(alpha)]
    }

    /// Nonzero terms `(α, c_α)` in rank order.
    pub fn terms(&self) -> Vec<(MultiIndex, T)> {
        let table = monomials(self.nvars, self.degree);
        table.iter().zip(&self.coeffs).filter(|(_, c)| !c.is_zero()).map(|(a, c)| (a.clone(), c.clone())).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs_f64()).fold(0.0, f64::max)
    }

    /// Rewrites `p` in degree `target ≥ degree` by multiplying with `Σλ`.
    pub fn elevate(&self, target: usize) -> Self {
        assert!(target >= self.degree, "cannot lower degree by elevation");
        let mut p = self.clone();
        while p.degree < target {
            let mut q = Self::zero(p.nvars, p.degree + 1);
            let table = monomials(p.nvars, p.degree);
            for (a, c) in table.iter().zip(&p.coeffs) {
                if c.is_zero() {
                    continue;
                }
                let mut b = a.clone();
                for s in 0..p.nvars {
                    b[s] += 1;
                    let r = rank(&b);
                    q.coeffs[r] = q.coeffs[r].clone() + c.clone();
                    b[s] -= 1;
                }
            }
            p = q;
        }
        p
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.nvars != other.nvars {
            return Err(Error::SimplexMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let k = self.degree.max(other.degree);
        let mut a = self.elevate(k);
        let b = other.elevate(k);
        for (x, y) in a.coeffs.iter_mut().zip(b.coeffs) {
            *x = x.clone() + y;
        }
        Ok(a)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(&-T::one()))
    }

    pub fn scale(&self, s: &T) -> Self {
        BaryPoly { nvars: self.nvars, degree: self.degree, coeffs: self.coeffs.iter().map(|c| c.clone() * s.clone()).collect() }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = Self::zero(self.nvars, self.degree + other.degree);
        let ta = monomials(self.nvars, self.degree);
        let tb = monomials(other.nvars, other.degree);
        let mut e = vec![0u32; self.nvars];
        for (a, ca) in ta.iter().zip(&self.coeffs) {
            if ca.is_zero() {
                continue;
            }
            for (b, cb) in tb.iter().zip(&other.coeffs) {
                if cb.is_zero() {
                    continue;
                }
                for s in 0..self.nvars {
                    e[s] = a[s] + b[s];
                }
                let r = rank(&e);
                out.coeffs[r] = out.coeffs[r].clone() + ca.clone() * cb.clone();
            }
        }
        Ok(out)
    }

    pub fn pow(&self, n: usize) -> Self {
        let mut r = Self::constant(self.nvars, T::one());
        for _ in 0..n {
            r = r.mul(self).expect("same simplex");
        }
        r
    }

    /// Formal partial derivative `∂p/∂λ_s` (degree drops by one).
    pub fn derivative(&self, s: usize) -> Self {
        if self.degree == 0 {
            return Self::zero(self.nvars, 0);
        }
        let mut out = Self::zero(self.nvars, self.degree - 1);
        let table = monomials(self.nvars, self.degree);
        for (a, c) in table.iter().zip(&self.coeffs) {
            if a[s] == 0 || c.is_zero() {
                continue;
            }
            let mut b = a.clone();
            b[s] -= 1;
            let r = rank(&b);
            out.coeffs[r] = out.coeffs[r].clone() + c.clone() * T::from_i64(a[s] as i64);
        }
        out
    }

    /// Cartesian gradient given the gradients `grads[s]` of the simplex's
    /// barycentric coordinates.
    pub fn gradient(&self, grads: &[Vec<T>]) -> Vec<Self> {
        let d = grads.first().map(|g| g.len()).unwrap_or(0);
        let kd = self.degree.saturating_sub(1);
        let mut out = vec![Self::zero(self.nvars, kd); d];
        for (s, g) in grads.iter().enumerate() {
            let ds = self.derivative(s);
            if ds.is_zero() {
                continue;
            }
            for r in 0..d {
                if g[r].is_zero() {
                    continue;
                }
                for (o, c) in out[r].coeffs.iter_mut().zip(&ds.coeffs) {
                    *o = o.clone() + c.clone() * g[r].clone();
                }
            }
        }
        out
    }

    pub fn eval(&self, lam: &[T]) -> T {
        let table = monomials(self.nvars, self.degree);
        let mut acc = T::zero();
        for (a, c) in table.iter().zip(&self.coeffs) {
            if c.is_zero() {
                continue;
            }
            let mut t = c.clone();
            for (s, &e) in a.iter().enumerate() {
                for _ in 0..e {
                    t = t * lam[s].clone();
                }
            }
            acc = acc + t;
        }
        acc
    }

    pub fn eval_f64(&self, lam: &[f64]) -> f64 {
        let table = monomials(self.nvars, self.degree);
        let mut acc = 0.0;
        for (a, c) in table.iter().zip(&self.coeffs) {
            if c.is_zero() {
                continue;
            }
            let mut t = c.to_f64();
            for (s, &e) in a.iter().enumerate() {
                if e > 0 {
                    t *= lam[s].powi(e as i32);
                }
            }
            acc += t;
        }
        acc
    }

    /// `∫_T p` for a simplex of measure `volume`, by
    /// `∫ λ^α = |T| d! α! / (|α| + d)!`.
    pub fn integrate(&self, volume: &T) -> T {
        let d = self.nvars - 1;
        let table = monomials(self.nvars, self.degree);
        let mut acc = T::zero();
        for (a, c) in table.iter().zip(&self.coeffs) {
            if c.is_zero() {
                continue;
            }
            let num = a.iter().fold(T::one(), |acc, &e| acc * factorial::<T>(e as usize));
            acc = acc + c.clone() * num;
        }
        acc * factorial::<T>(d) * volume.clone() / factorial::<T>(self.degree + d)
    }

    /// Substitutes `λ_j ↦ subs[j]` (each a linear polynomial in a common set
    /// of variables).
    pub fn compose(&self, subs: &[Self]) -> Result<Self> {
        if subs.len() != self.nvars {
            return Err(Error::DimensionMismatch(format!("{} substitutions for {} variables", subs.len(), self.nvars)));
        }
        let m = subs[0].nvars;
        let powers: Vec<Vec<Self>> = subs
            .iter()
            .map(|s| {
                let mut p = vec![Self::constant(m, T::one())];
                for e in 1..=self.degree {
                    let next = p[e - 1].mul(s).expect("uniform substitution");
                    p.push(next);
                }
                p
            })
            .collect();
        let mut out = Self::zero(m, self.degree);
        let table = monomials(self.nvars, self.degree);
        for (a, c) in table.iter().zip(&self.coeffs) {
            if c.is_zero() {
                continue;
            }
            let mut t = Self::constant(m, c.clone());
            for (j, &e) in a.iter().enumerate() {
                if e > 0 {
                    t = t.mul(&powers[j][e as usize])?;
                }
            }
            out = out.add(&t)?;
        }
        Ok(out)
    }

    pub fn to_f64(&self) -> BaryPoly<f64> {
        BaryPoly { nvars: self.nvars, degree: self.degree, coeffs: self.coeffs.iter().map(|c| c.to_f64()).collect() }
    }

    pub fn from_f64(p: &BaryPoly<f64>) -> Self {
        BaryPoly { nvars: p.nvars, degree: p.degree, coeffs: p.coeffs.iter().map(|&c| T::from_f64(c)).collect() }
    }
}
