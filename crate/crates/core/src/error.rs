use thiserror::Error;

/// Errors raised by the kernels, preconditioners, solvers and analysis routines.
#[derive(Debug, Error)]
pub enum KplError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("zero dimension")]
    ZeroDimension,

    #[error("matrix market parse error (line {line}): {msg}")]
    MatrixMarket { line: usize, msg: String },

    #[error("nonpositive diagonal entry {value} in row {row}")]
    NonPositiveDiagonal { row: usize, value: f64 },

    #[error("incomplete Cholesky breakdown: pivot {pivot} in row {row}")]
    FactorizationBreakdown { row: usize, pivot: f64 },

    #[error("breakdown in iteration {iter}: {reason}")]
    Breakdown { iter: usize, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("index {index} out of range (valid 1..={len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("empty shift grid")]
    EmptyGrid,

    #[error("malformed history: {0}")]
    History(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, KplError>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(KplError::DimensionMismatch { expected, found })
    }
}
