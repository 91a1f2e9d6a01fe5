//! Divergence-free, inf-sup stable Stokes elements on barycentric
//! (Alfeld) refinements of simplicial meshes in arbitrary dimension.
//!
//! The crate is organised bottom-up:
//!
//! - [`mesh`]: simplicial meshes, the interior-point split of every cell,
//!   entity enumeration and mesh files.
//! - [`poly`]: homogeneous barycentric-monomial polynomials on simplices and
//!   on split cells, the piecewise-linear `λ` system, calculus and quadrature.
//! - [`local_div`]: the constructive right inverse of the divergence on one
//!   split cell.
//! - [`bubbles`]: Bernardi–Raugel face bubbles, their constant-divergence
//!   modification and the `ψ`/`θ` fields.
//! - [`space`]: global finite element spaces, DOF maps and operator assembly.
//! - [`linalg`]: dense/sparse solvers and eigen-analysis (backed by `faer`).
//! - [`stokes`]: discrete Stokes solves and convergence studies.
//! - [`stability`]: discrete inf-sup constants and surjectivity witnesses.

pub mod bubbles;
pub mod error;
pub mod linalg;
pub mod local_div;
pub mod mesh;
pub mod poly;
pub mod rng;
pub mod scalar;
pub mod space;
pub mod stability;
pub mod stokes;

pub use error::{Error, Result};
pub use scalar::Scalar;
