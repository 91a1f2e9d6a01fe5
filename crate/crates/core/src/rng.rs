//! Seeded random inputs: simplices, barycentric points, polynomials.

use crate::mesh::geometry::{shape_constant, signed_volume};
use crate::poly::{LambdaSystem, SplitPoly};
use crate::scalar::Scalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Shape-constant bound used when drawing random simplices.
pub const MAX_RANDOM_SHAPE: f64 = 20.0;

/// Independent generator for `(seed, stream)`.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// A positively oriented perturbation of the reference simplex with shape
/// constant at most [`MAX_RANDOM_SHAPE`].
pub fn random_simplex<R: Rng>(d: usize, rng: &mut R) -> Vec<Vec<f64>> {
    loop {
        let mut pts = vec![vec![0.0; d]];
        for i in 0..d {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            pts.push(e);
        }
        for p in &mut pts {
            for x in p.iter_mut() {
                *x += rng.random_range(-0.4..0.4);
            }
        }
        if signed_volume(&pts) <= 0.0 {
            continue;
        }
        if shape_constant(&pts).is_some_and(|c| c <= MAX_RANDOM_SHAPE) {
            return pts;
        }
    }
}

/// Uniform point of the standard `n-1` simplex, as `n` barycentric weights.
pub fn random_bary<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -rng.random_range(f64::EPSILON..1.0f64).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Random piecewise polynomial of the given degree, no continuity.
pub fn random_split_poly<T: Scalar, R: Rng>(d: usize, degree: usize, rng: &mut R) -> SplitPoly<T> {
    let mut p = SplitPoly::<T>::zero(d, degree);
    for piece in &mut p.pieces {
        let n = piece.coeffs().len();
        let coeffs: Vec<T> = (0..n).map(|_| T::from_f64((rng.random_range(-1.0..1.0f64) * 64.0).round() / 64.0)).collect();
        *piece = crate::poly::BaryPoly::from_coeffs(d + 1, degree, coeffs).expect("sized");
    }
    p.continuity = crate::poly::Continuity::L2;
    p
}

/// Random piecewise polynomial with zero mean over the split cell.
pub fn random_zero_mean<T: Scalar, R: Rng>(ls: &LambdaSystem<T>, degree: usize, rng: &mut R) -> SplitPoly<T> {
    let p = random_split_poly::<T, R>(ls.d, degree, rng);
    let m = ls.mean(&p);
    p.sub(&SplitPoly::constant(ls.d, degree, m)).expect("same cell")
}
