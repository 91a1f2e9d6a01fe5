//! Dense geometric kernels on a single simplex, generic over the scalar field
//! where the result is rational in the vertex coordinates.

use crate::scalar::{gauss_solve, Scalar};

/// Edge matrix `J` with columns `y_s - y_0`, stored row-major (`J[r][s-1]`).
fn edge_matrix<T: Scalar>(pts: &[Vec<T>]) -> Vec<Vec<T>> {
    let d = pts.len() - 1;
    (0..d)
        .map(|r| (1..=d).map(|s| pts[s][r].clone() - pts[0][r].clone()).collect())
        .collect()
}

pub fn determinant<T: Scalar>(mut a: Vec<Vec<T>>) -> T {
    let n = a.len();
    let mut det = T::one();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs_f64().total_cmp(&a[j][col].abs_f64()));
        let piv = match piv {
            Some(p) if !a[p][col].is_zero() => p,
            _ => return T::zero(),
        };
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        let p = a[col][col].clone();
        det = det * p.clone();
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone() / p.clone();
            for c in col..n {
                let t = a[col][c].clone() * f.clone();
                a[r][c] = a[r][c].clone() - t;
            }
        }
    }
    det
}

fn factorial_t<T: Scalar>(n: usize) -> T {
    (1..=n).fold(T::one(), |acc, k| acc * T::from_i64(k as i64))
}

/// Signed volume `det(J)/d!`.
pub fn signed_volume<T: Scalar>(pts: &[Vec<T>]) -> T {
    let d = pts.len() - 1;
    determinant(edge_matrix(pts)) / factorial_t::<T>(d)
}

/// Gradients of the barycentric coordinates of the simplex `pts` (`d+1`
/// points in `ℝᵈ`). Returns `None` for a degenerate simplex.
pub fn bary_gradients<T: Scalar>(pts: &[Vec<T>]) -> Option<Vec<Vec<T>>> {
    let d = pts.len() - 1;
    let j = edge_matrix(pts);
    // rows of J⁻¹: solve Jᵀ g_s = e_s
    let jt: Vec<Vec<T>> = (0..d).map(|r| (0..d).map(|c| j[c][r].clone()).collect()).collect();
    let mut grads = vec![vec![T::zero(); d]; d + 1];
    for s in 0..d {
        let mut e = vec![T::zero(); d];
        e[s] = T::one();
        grads[s + 1] = gauss_solve(jt.clone(), e)?;
    }
    for r in 0..d {
        let mut acc = T::zero();
        for g in grads.iter().skip(1) {
            acc = acc - g[r].clone();
        }
        grads[0][r] = acc;
    }
    Some(grads)
}

/// Barycentric coordinates of `x` with respect to `pts`.
pub fn barycentric_coords(pts: &[Vec<f64>], x: &[f64]) -> Option<Vec<f64>> {
    let grads = bary_gradients(pts)?;
    let d = x.len();
    let mut lam = vec![0.0; d + 1];
    for s in 1..=d {
        lam[s] = (0..d).map(|r| grads[s][r] * (x[r] - pts[0][r])).sum();
    }
    lam[0] = 1.0 - lam[1..].iter().sum::<f64>();
    Some(lam)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Diameter (longest edge).
pub fn diameter(pts: &[Vec<f64>]) -> f64 {
    let mut h: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            h = h.max(dist(&pts[i], &pts[j]));
        }
    }
    h
}

/// Measures of the facets opposite each vertex: `|F_i| = d |K| |∇μ_i|`.
pub fn facet_measures(pts: &[Vec<f64>]) -> Option<Vec<f64>> {
    let d = pts.len() - 1;
    let vol = signed_volume(pts).abs();
    let grads = bary_gradients(pts)?;
    Some(grads.iter().map(|g| d as f64 * vol * norm(g)).collect())
}

/// Inradius `ρ = d |K| / Σ |F_i|`.
pub fn inradius(pts: &[Vec<f64>]) -> Option<f64> {
    let d = pts.len() - 1;
    let vol = signed_volume(pts).abs();
    let total: f64 = facet_measures(pts)?.iter().sum();
    Some(d as f64 * vol / total)
}

/// Shape constant `h_K / ρ_K` (ρ_K the inradius).
pub fn shape_constant(pts: &[Vec<f64>]) -> Option<f64> {
    Some(diameter(pts) / inradius(pts)?)
}

pub fn barycenter(pts: &[Vec<f64>]) -> Vec<f64> {
    let d = pts[0].len();
    let n = pts.len() as f64;
    (0..d).map(|r| pts.iter().map(|p| p[r]).sum::<f64>() / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_triangle_volume_and_gradients() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!((signed_volume(&pts) - 0.5).abs() < 1e-15);
        let g = bary_gradients(&pts).unwrap();
        assert_eq!(g[0], vec![-1.0, -1.0]);
        assert_eq!(g[1], vec![1.0, 0.0]);
        assert_eq!(g[2], vec![0.0, 1.0]);
    }

    #[test]
    fn unit_triangle_shape_constant() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let rho = inradius(&pts).unwrap();
        assert!((rho - (2.0 - 2f64.sqrt()) / 2.0).abs() < 1e-14);
        assert!((shape_constant(&pts).unwrap() - 2f64.sqrt() / rho).abs() < 1e-12);
        assert!((shape_constant(&pts).unwrap() - 4.828427124746).abs() < 1e-9);
    }

    #[test]
    fn equilateral_shape_constant() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 3f64.sqrt() / 2.0]];
        assert!((shape_constant(&pts).unwrap() - 2.0 * 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_has_no_gradients() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]];
        assert!(bary_gradients(&pts).is_none());
        assert_eq!(signed_volume(&pts), 0.0);
    }
}
