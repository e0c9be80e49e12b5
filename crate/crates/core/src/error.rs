use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dimension {0} exceeds the configured cap")]
    DimensionTooLarge(usize),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("unknown identifier `{0}`")]
    UnknownId(String),
    #[error("duplicate identifier `{0}`")]
    DuplicateId(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("kernels differ")]
    KernelMismatch,
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("model does not reproduce the scenario: {0}")]
    NotReproducing(String),
    #[error("unfaithful model: {0}")]
    Unfaithful(String),
    #[error("search space too large: {count} candidate types exceeds the limit {limit}")]
    SearchTooLarge { count: u128, limit: u128 },
    #[error("no solution found after {iterations} iterations (best residual {residual:e}); not a proof of nonexistence")]
    NotFound { iterations: usize, residual: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invariant(msg: impl Into<String>) -> Error {
    Error::Invariant(msg.into())
}
