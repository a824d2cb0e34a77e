use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("forward tape is stale (recorded at parameter version {tape}, network is at {network})")]
    StaleTape { tape: u64, network: u64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("misuse: {0}")]
    Misuse(String),

    #[error("value iteration did not converge within {iterations} sweeps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),
}

pub type Result<T> = std::result::Result<T, Error>;
