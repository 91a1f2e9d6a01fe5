use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degenerate cell {cell} (volume {volume:e})")]
    DegenerateCell { cell: usize, volume: f64 },
    #[error("non-conforming mesh: {0}")]
    NonConforming(String),
    #[error("split point of cell {0} lies outside the cell")]
    SplitPointOutside(usize),
    #[error("split point of cell {0} lies on the cell boundary")]
    SplitPointOnBoundary(usize),
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("mesh file parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),

    #[error("polynomials live on different simplices")]
    SimplexMismatch,
    #[error("fields live on different macro cells")]
    CellMismatch,
    #[error("degenerate child simplex in cell {0}")]
    DegenerateChild(usize),
    #[error("quadrature degree {0} exceeds the implemented cap")]
    UnsupportedDegree(usize),
    #[error("degree mismatch: expected at most {expected}, found {found}")]
    DegreeMismatch { expected: usize, found: usize },
    #[error("polynomial degree {0} exceeds the configured cap")]
    DegreeTooHigh(usize),

    #[error("normal system is singular")]
    SingularNormalSystem,
    #[error("input does not have zero mean (relative mean {0:e})")]
    MeanNotZero(f64),
    #[error("unimposed child identity violated (residual {0:e})")]
    CorrectionIdentity(f64),
    #[error("gradient system for index {0} is singular")]
    SingularGradientSystem(usize),

    #[error("unsupported space: {0}")]
    UnsupportedKind(String),
    #[error("space requires {0}")]
    DimensionRule(String),
    #[error("DOF matrix is singular (smallest scaled singular value {0:e})")]
    SingularDofMatrix(f64),
    #[error("summed spaces are linearly dependent on cell {0}")]
    DirectSumDependent(usize),
    #[error("spaces are defined on different meshes")]
    MeshMismatch,

    #[error("matrix is not symmetric positive definite")]
    NotSpd,
    #[error("mass matrix is not symmetric positive definite")]
    MassNotSpd,
    #[error("matrix is singular to tolerance")]
    SingularToTolerance,
    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("velocity space is empty")]
    EmptyVelocitySpace,
    #[error("pressure space has no mean-free part")]
    EmptyPressureSpace,
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("flux system is singular")]
    FluxSystemSingular,
    #[error("solver failure: {0}")]
    SolverFailure(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
