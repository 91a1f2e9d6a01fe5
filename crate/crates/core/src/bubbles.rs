//! Face bubbles `b_i = B_i n_i`, their constant-divergence modifications
//! `β_i = b_i − w_i`, and the quadratic fields `ψ_i`, `θ_i`.
//!
//! Index `i` is the 0-based macro vertex; face `F_i` is opposite it.

use crate::error::{Error, Result};
use crate::local_div::{solve_local_div, DivSolveReport};
use crate::mesh::geometry::norm;
use crate::poly::{BaryPoly, LambdaSystem, SplitPoly, VectorField};
use crate::scalar::gauss_solve;

#[derive(Debug, Clone)]
pub struct FaceBubble {
    pub face: usize,
    pub normal: Vec<f64>,
    /// `B_i = Π_{j≠i} μ_j` in macro barycentric coordinates.
    pub scalar: BaryPoly<f64>,
    /// `b_i` on the split cell.
    pub field: VectorField<f64>,
    pub face_measure: f64,
    /// `∫_{F_i} B_i`.
    pub face_integral: f64,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

pub fn face_bubble(ls: &LambdaSystem<f64>, i: usize) -> Result<FaceBubble> {
    let d = ls.d;
    if i > d {
        return Err(Error::IndexOutOfRange { index: i, len: d + 1 });
    }
    let g = &ls.mu_grads[i];
    let gn = norm(g);
    let normal: Vec<f64> = g.iter().map(|x| -x / gn).collect();
    let alpha: Vec<u32> = (0..=d).map(|j| u32::from(j != i)).collect();
    let scalar = BaryPoly::monomial(&alpha, 1.0);
    let restricted = ls.restrict_macro(&scalar)?;
    let field = normal.iter().map(|n| restricted.scale(n)).collect();
    let face_measure = d as f64 * ls.volume * gn;
    let face_integral = face_measure * factorial(d - 1) / factorial(2 * d - 1);
    Ok(FaceBubble { face: i, normal, scalar, field, face_measure, face_integral })
}

#[derive(Debug, Clone)]
pub struct ModifiedBubble {
    pub face: usize,
    pub field: VectorField<f64>,
    /// The constant `div β_i = |K|⁻¹ ∫_{F_i} B_i`.
    pub div_value: f64,
    pub bubble: FaceBubble,
    pub correction: DivSolveReport<f64>,
}

pub fn modify_bubble(ls: &LambdaSystem<f64>, i: usize) -> Result<ModifiedBubble> {
    let bubble = face_bubble(ls, i)?;
    let d = ls.d;
    let div = ls.divergence(&bubble.field)?;
    let mean = ls.mean(&div);
    let g = div.sub(&SplitPoly::constant(d, div.degree(), mean))?;
    let correction = solve_local_div(&g, d, ls)?;
    let field = bubble.field.iter().zip(&correction.v).map(|(b, w)| b.sub(w)).collect::<Result<_>>()?;
    Ok(ModifiedBubble { face: i, field, div_value: bubble.face_integral / ls.volume, bubble, correction })
}

/// `ψ_i = c_i λ_i²` with `div ψ_i = λ_i`.
#[derive(Debug, Clone)]
pub struct Psi {
    pub index: usize,
    pub c: Vec<f64>,
    pub field: VectorField<f64>,
}

/// `θ_i = ½ c_i (λ_i² − μ_i²)`, a bubble with continuous divergence and
/// `div θ_i(x_j) = δ_ij`.
#[derive(Debug, Clone)]
pub struct Theta {
    pub index: usize,
    pub c: Vec<f64>,
    pub field: VectorField<f64>,
}

pub fn build_psi(ls: &LambdaSystem<f64>, i: usize) -> Result<Psi> {
    let d = ls.d;
    if i > d {
        return Err(Error::IndexOutOfRange { index: i, len: d + 1 });
    }
    let rows: Vec<Vec<f64>> = (0..=d).filter(|&j| j != i).map(|j| ls.grad_lambda(i + 1, j).iter().map(|g| 2.0 * g).collect()).collect();
    let c = gauss_solve(rows, vec![1.0; d]).ok_or(Error::SingularGradientSystem(i))?;
    let l = ls.lambda(i + 1);
    let sq = l.mul(&l)?;
    let field = c.iter().map(|ci| sq.scale(ci)).collect();
    Ok(Psi { index: i, c, field })
}

pub fn build_theta(ls: &LambdaSystem<f64>, i: usize) -> Result<Theta> {
    let d = ls.d;
    if i > d {
        return Err(Error::IndexOutOfRange { index: i, len: d + 1 });
    }
    // ∇(λ_i − μ_i) = −μ_i(x0) ∇λ_0 on each child
    let rows: Vec<Vec<f64>> = (0..=d).filter(|&j| j != i).map(|j| ls.grad_lambda0(j).iter().map(|g| -ls.mu_x0[i] * g).collect()).collect();
    let c = gauss_solve(rows, vec![1.0; d]).ok_or(Error::SingularGradientSystem(i))?;
    let l = ls.lambda(i + 1);
    let mu = ls.restrict_macro(&BaryPoly::var(d + 1, i))?;
    let diff = l.mul(&l)?.sub(&mu.mul(&mu)?)?;
    let field = c.iter().map(|ci| diff.scale(&(0.5 * ci))).collect();
    Ok(Theta { index: i, c, field })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_div::boundary_trace_max;
    use crate::mesh::reference_simplex;
    use crate::rng::rng;

    fn tri() -> LambdaSystem<f64> {
        LambdaSystem::new(&reference_simplex(2).cell_points(0), &[1.0 / 3.0, 1.0 / 3.0]).unwrap()
    }

    #[test]
    fn bottom_face_bubble_of_unit_triangle() {
        let ls = tri();
        // F opposite (0,1) is y = 0; B = μ_0 μ_1 = (1−x−y) x
        let b = face_bubble(&ls, 2).unwrap();
        assert!((b.normal[0]).abs() < 1e-15 && (b.normal[1] + 1.0).abs() < 1e-15);
        assert!((b.face_integral - 1.0 / 6.0).abs() < 1e-15);
        let div = ls.divergence(&b.field).unwrap();
        for x in [[0.2, 0.1], [0.6, 0.3], [0.1, 0.7]] {
            assert!((ls.eval(&div, &x) - x[0]).abs() < 1e-14);
            let v = ls.eval(&b.field[1], &x);
            assert!((v + (1.0 - x[0] - x[1]) * x[0]).abs() < 1e-14);
        }
        for v in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]] {
            assert!(ls.eval(&b.field[1], &v).abs() < 1e-15);
        }
    }

    #[test]
    fn modified_bottom_bubble_has_divergence_one_third() {
        let ls = tri();
        let m = modify_bubble(&ls, 2).unwrap();
        assert!((m.div_value - 1.0 / 3.0).abs() < 1e-14);
        let div = ls.divergence(&m.field).unwrap();
        let deviation = div.sub(&SplitPoly::constant(2, div.degree(), 1.0 / 3.0)).unwrap().max_abs();
        assert!(deviation < 1e-12);
        let diff: Vec<_> = m.field.iter().zip(&m.bubble.field).map(|(a, b)| a.sub(b).unwrap()).collect();
        assert!(boundary_trace_max(&diff, &ls, 100, &mut rng(0, 0)) < 1e-12);
    }

    #[test]
    fn tetrahedron_modified_bubbles() {
        let ls = LambdaSystem::<f64>::new(&reference_simplex(3).cell_points(0), &[0.25; 3]).unwrap();
        for i in 0..4 {
            let m = modify_bubble(&ls, i).unwrap();
            let div = ls.divergence(&m.field).unwrap();
            let dev = div.sub(&SplitPoly::constant(3, div.degree(), m.div_value)).unwrap().max_abs();
            assert!(dev < 1e-11);
        }
    }

    #[test]
    fn psi_divergence_is_lambda() {
        let ls = tri();
        let psi = build_psi(&ls, 0).unwrap();
        let div = ls.divergence(&psi.field).unwrap();
        assert!(div.sub(&ls.lambda(1)).unwrap().max_abs() < 1e-13);
        assert!((ls.eval(&div, &[0.0, 0.0]) - 1.0).abs() < 1e-13);
        let g = ls.grad_lambda(1, 1);
        assert!((2.0 * (psi.c[0] * g[0] + psi.c[1] * g[1]) - 1.0).abs() < 1e-13);
        assert!(ls.continuity_residual(&div, 3) < 1e-12);
    }

    #[test]
    fn theta_properties() {
        let ls = LambdaSystem::<f64>::new(&reference_simplex(3).cell_points(0), &[0.2, 0.3, 0.25]).unwrap();
        let verts = reference_simplex(3).cell_points(0);
        for i in 0..4 {
            let th = build_theta(&ls, i).unwrap();
            let div = ls.divergence(&th.field).unwrap();
            for (j, x) in verts.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ls.eval(&div, x) - expect).abs() < 1e-12);
            }
            assert!(ls.continuity_residual(&div, 3) < 1e-11);
            assert!(boundary_trace_max(&th.field, &ls, 100, &mut rng(1, i as u64)) < 1e-12);
        }
    }
}
