use thiserror::Error;

/// Errors raised by the cone routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConeError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported smoothness: {0}")]
    UnsupportedSmoothness(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("not differentiable: {0}")]
    NotDifferentiable(String),
    #[error("solver failed after {iterations} iterations (best residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },
    #[error("dimension {m} exceeds the oracle limit {limit}")]
    DimensionCap { m: usize, limit: usize },
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, ConeError>;
