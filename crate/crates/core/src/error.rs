use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("schedule infeasible: k1 = {k1} is below the smallest allowed k = {min_k}")]
    ScheduleInfeasible { k1: usize, min_k: usize },

    #[error("class {class} has {available} samples, {requested} requested")]
    InsufficientClass {
        class: u32,
        available: usize,
        requested: usize,
    },

    #[error("input too large for dense decomposition: {0}")]
    SizeGuard(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },

    #[error("decode error: {0}")]
    Decode(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
