use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty buffer")]
    EmptyBuffer,

    #[error("empty model memory")]
    EmptyModel,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("weights are not a probability vector (sum = {sum})")]
    UnnormalizedWeights { sum: f64 },

    #[error("environment mismatch: {0}")]
    EnvMismatch(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
