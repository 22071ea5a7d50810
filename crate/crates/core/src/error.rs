use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("invalid weight parameters: {0}")]
    InvalidWeight(String),
    #[error("invalid mass point: {0}")]
    InvalidMassPoint(String),
    #[error("node count must be positive")]
    NoNodes,
    #[error("evaluation point collides with a node or atom")]
    NodeCollision,
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("consecutive supports {0} and {1} overlap")]
    OverlappingSupports(usize, usize),
    #[error("the two systems must share the same base measure")]
    BaseMeasureMismatch,
    #[error("invalid multi-index: {0}")]
    InvalidIndex(String),
    #[error("moment system is singular")]
    SingularSystem,
    #[error("normality violated: deg a_{j} = {got:?}, expected {expected}")]
    NormalityViolation {
        j: usize,
        got: Option<usize>,
        expected: usize,
    },
    #[error("form {j}: found {found} zeros, expected {expected}")]
    ZeroCountMismatch {
        j: i32,
        found: usize,
        expected: usize,
    },
    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),
    #[error("interaction matrix is not positive definite")]
    IndefiniteMatrix,
    #[error(
        "equilibrium solver did not converge: residual {residual:e} after {iterations} iterations"
    )]
    NoConvergence { residual: f64, iterations: usize },
    #[error("point is in the excluded set: {0}")]
    ExcludedPoint(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
