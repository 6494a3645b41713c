use thiserror::Error;

#[derive(Debug, Error)]
pub enum HodgeError {
    #[error("invalid triangle id {0}")]
    InvalidTriangle(usize),
    #[error("invalid edge id {0}")]
    InvalidEdge(usize),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("mesh is not conforming: {0}")]
    NonConforming(String),
    #[error("no space of degree {0} above this one in two dimensions")]
    NoHigherSpace(usize),
    #[error("coderivative undefined for degree {0}")]
    UndefinedCoderivative(usize),
    #[error("unsupported form degree {0}")]
    Degree(usize),
    #[error("degree mismatch: expected {expected}, found {found}")]
    DegreeMismatch { expected: usize, found: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("linear solve did not reach tolerance: relative residual {residual:e}")]
    SolveTolerance { residual: f64 },
    #[error("eigen-iteration did not converge: {0}")]
    EigenNonConvergence(String),
    #[error("harmonic dimension {found} differs from expected {expected}")]
    HarmonicDimension { expected: usize, found: usize },
    #[error("meshes are not nested")]
    NonNested,
    #[error("exact solution required but not available")]
    MissingExact,
    #[error("invalid input: {0}")]
    Input(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HodgeError>;
