//! Dense and sparse linear algebra on top of `faer`: SPD and indefinite
//! solves, minimal-norm least squares, symmetric generalized eigenvalues,
//! numerical rank, a coordinate-format sparse type and Matrix Market I/O.

use crate::error::{Error, Result};
use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, MatRef, Par, Side};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

pub use faer::Mat as DenseMatrix;

/// Square or rectangular sparse matrix with summed duplicate entries.
#[derive(Debug, Clone, Default)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    entries: BTreeMap<(usize, usize), f64>,
}

impl SparseMatrix {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        SparseMatrix { nrows, ncols, entries: BTreeMap::new() }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        if v != 0.0 {
            *self.entries.entry((i, j)).or_insert(0.0) += v;
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.get(&(i, j)).copied().unwrap_or(0.0)
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    pub fn transpose(&self) -> Self {
        let mut t = SparseMatrix::new(self.ncols, self.nrows);
        for (i, j, v) in self.iter() {
            t.entries.insert((j, i), v);
        }
        t
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for (i, j, v) in self.iter() {
            y[i] += v * x[j];
        }
        y
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.values().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `max |a_ij − a_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        self.iter().map(|(i, j, v)| (v - self.get(j, i)).abs()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.iter() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn to_faer(&self) -> SparseColMat<usize, f64> {
        let trip: Vec<Triplet<usize, usize, f64>> = self.iter().map(|(row, col, val)| Triplet { row, col, val }).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trip).expect("valid sparse pattern")
    }

    /// Permutes rows and columns: entry `(i, j)` moves to `(p[i], q[j])`.
    pub fn permuted(&self, p: &[usize], q: &[usize]) -> Self {
        let mut m = SparseMatrix::new(self.nrows, self.ncols);
        for (i, j, v) in self.iter() {
            m.entries.insert((p[i], q[j]), v);
        }
        m
    }

    pub fn to_matrix_market(&self) -> String {
        let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.nrows, self.ncols, self.nnz());
        for (i, j, v) in self.iter() {
            let _ = writeln!(s, "{} {} {:e}", i + 1, j + 1, v);
        }
        s
    }

    pub fn from_matrix_market(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('%') && !l.trim().is_empty());
        let (no, header) = lines.next().ok_or(Error::Parse { line: 0, msg: "empty file".into() })?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse { line: no + 1, msg: "bad size line".into() }))
            .collect::<Result<_>>()?;
        if dims.len() != 3 {
            return Err(Error::Parse { line: no + 1, msg: "expected `rows cols nnz`".into() });
        }
        let mut m = SparseMatrix::new(dims[0], dims[1]);
        for (no, l) in lines {
            let t: Vec<&str> = l.split_whitespace().collect();
            let bad = || Error::Parse { line: no + 1, msg: "bad entry".into() };
            if t.len() != 3 {
                return Err(bad());
            }
            let i: usize = t[0].parse().map_err(|_| bad())?;
            let j: usize = t[1].parse().map_err(|_| bad())?;
            let v: f64 = t[2].parse().map_err(|_| bad())?;
            if i == 0 || j == 0 || i > m.nrows || j > m.ncols {
                return Err(bad());
            }
            m.add(i - 1, j - 1, v);
        }
        Ok(m)
    }

    pub fn write_matrix_market(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_matrix_market())?;
        Ok(())
    }

    pub fn read_matrix_market(path: &Path) -> Result<Self> {
        Self::from_matrix_market(&std::fs::read_to_string(path)?)
    }
}

pub fn col(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn to_vec(m: MatRef<'_, f64>) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

pub fn max_abs(m: MatRef<'_, f64>) -> f64 {
    let mut a: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            a = a.max(m[(i, j)].abs());
        }
    }
    a
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_residual(m: MatRef<'_, f64>, x: &[f64], rhs: &[f64]) -> Result<()> {
    let r = m * col(x);
    let res: f64 = (0..rhs.len()).map(|i| (r[(i, 0)] - rhs[i]).powi(2)).sum::<f64>().sqrt();
    let scale = max_abs(m) * (m.ncols() as f64).sqrt() * norm2(x) + norm2(rhs);
    if !res.is_finite() || res > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::SingularToTolerance);
    }
    Ok(())
}

fn check_square(m: MatRef<'_, f64>, n: usize) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() != n {
        return Err(Error::DimensionMismatch(format!("{}x{} matrix with {} right-hand side entries", m.nrows(), m.ncols(), n)));
    }
    Ok(())
}

/// Cholesky solve of a symmetric positive definite system.
pub fn solve_spd(m: MatRef<'_, f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    check_square(m, rhs.len())?;
    let llt = m.llt(Side::Lower).map_err(|_| Error::NotSpd)?;
    let x = to_vec(llt.solve(col(rhs)).as_ref());
    check_residual(m, &x, rhs)?;
    Ok(x)
}

/// Bunch–Kaufman (`L B Lᵀ`) solve of a symmetric, possibly indefinite system.
pub fn solve_symmetric_indefinite(m: MatRef<'_, f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    check_square(m, rhs.len())?;
    let f = m.lblt(Side::Lower);
    let x = to_vec(f.solve(col(rhs)).as_ref());
    check_residual(m, &x, rhs)?;
    Ok(x)
}

/// Minimal-norm least-squares solution through the SVD; singular values
/// below `1e-12 σ_max` are treated as zero.
pub fn least_squares(m: MatRef<'_, f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    if m.nrows() != rhs.len() {
        return Err(Error::DimensionMismatch("least squares shape".into()));
    }
    let svd = m.thin_svd().map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let smax = (0..s.nrows()).map(|i| s[i]).fold(0.0, f64::max);
    let mut x = vec![0.0; m.ncols()];
    for k in 0..s.nrows() {
        if s[k] <= 1e-12 * smax || s[k] == 0.0 {
            continue;
        }
        let c: f64 = (0..rhs.len()).map(|i| u[(i, k)] * rhs[i]).sum::<f64>() / s[k];
        for (j, xj) in x.iter_mut().enumerate() {
            *xj += c * v[(j, k)];
        }
    }
    Ok(x)
}

/// Singular values, nonincreasing.
pub fn singular_values(m: MatRef<'_, f64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(vec![]);
    }
    m.singular_values().map_err(|e| Error::Linalg(format!("{e:?}")))
}

/// Numerical rank with threshold `rel_tol · σ_max`.
pub fn rank(m: MatRef<'_, f64>, rel_tol: f64) -> Result<usize> {
    let s = singular_values(m)?;
    let smax = s.first().copied().unwrap_or(0.0);
    Ok(s.iter().filter(|&&x| x > rel_tol * smax && x > 0.0).count())
}

/// `L⁻¹ S L⁻ᵀ` for `M = L Lᵀ`.
fn reduce_pencil(s: MatRef<'_, f64>, m: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let llt = m.llt(Side::Lower).map_err(|_| Error::MassNotSpd)?;
    let l = llt.L();
    let mut x = s.to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, x.as_mut(), Par::Seq);
    let mut y = x.transpose().to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, y.as_mut(), Par::Seq);
    // symmetrize against rounding
    let n = y.nrows();
    Ok(Mat::from_fn(n, n, |i, j| 0.5 * (y[(i, j)] + y[(j, i)])))
}

/// Eigenvalues of `S x = λ M x` (`S` symmetric, `M` SPD), ascending.
pub fn generalized_symmetric_eig(s: MatRef<'_, f64>, m: MatRef<'_, f64>) -> Result<Vec<f64>> {
    if s.nrows() != m.nrows() || s.ncols() != m.ncols() || s.nrows() != s.ncols() {
        return Err(Error::DimensionMismatch("pencil shapes differ".into()));
    }
    let c = reduce_pencil(s, m)?;
    c.self_adjoint_eigenvalues(Side::Lower).map_err(|e| Error::Linalg(format!("{e:?}")))
}

/// Eigenpairs of `S x = λ M x`; eigenvectors are `M`-orthonormal columns.
pub fn generalized_symmetric_eigen(s: MatRef<'_, f64>, m: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let c = reduce_pencil(s, m)?;
    let evd = c.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let vals: Vec<f64> = (0..c.nrows()).map(|i| evd.S().column_vector()[i]).collect();
    let llt = m.llt(Side::Lower).map_err(|_| Error::MassNotSpd)?;
    let mut vecs = evd.U().to_owned();
    faer::linalg::triangular_solve::solve_upper_triangular_in_place(llt.L().transpose(), vecs.as_mut(), Par::Seq);
    Ok((vals, vecs))
}

/// Sparse Cholesky factorization, reusable for many right-hand sides.
pub struct SparseSpd {
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
    n: usize,
}

impl SparseSpd {
    pub fn new(m: &SparseMatrix) -> Result<Self> {
        if m.nrows != m.ncols {
            return Err(Error::DimensionMismatch("sparse Cholesky of a rectangular matrix".into()));
        }
        let llt = m.to_faer().sp_cholesky(Side::Lower).map_err(|_| Error::NotSpd)?;
        Ok(SparseSpd { llt, n: m.nrows })
    }

    pub fn solve_many(&self, rhs: MatRef<'_, f64>) -> Mat<f64> {
        assert_eq!(rhs.nrows(), self.n);
        self.llt.solve(rhs)
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        to_vec(self.solve_many(col(rhs).as_ref()).as_ref())
    }
}

/// Sparse LU solve with a residual check.
pub fn sparse_lu_solve(m: &SparseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    if m.nrows != m.ncols || m.nrows != rhs.len() {
        return Err(Error::DimensionMismatch("sparse solve shapes".into()));
    }
    let lu = m.to_faer().sp_lu().map_err(|e| Error::SolverFailure(format!("{e:?}")))?;
    let x = to_vec(lu.solve(col(rhs)).as_ref());
    let r = m.matvec(&x);
    let res = norm2(&r.iter().zip(rhs).map(|(a, b)| a - b).collect::<Vec<_>>());
    let scale = m.max_abs() * (m.ncols as f64).sqrt() * norm2(&x) + norm2(rhs);
    if !res.is_finite() || res > 1e-9 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::SolverFailure(format!("residual {res:e} after sparse LU")));
    }
    Ok(x)
}
