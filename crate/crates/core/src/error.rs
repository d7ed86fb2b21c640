use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid p-value for `{id}`: {value} (must be a finite number in [0, 1])")]
    InvalidPValue { id: String, value: f64 },

    #[error("duplicate hypothesis id `{0}`")]
    DuplicateId(String),

    #[error("hypothesis ids must be nonempty")]
    EmptyId,

    #[error("at least one hypothesis is required")]
    NoHypotheses,

    #[error("unknown hypothesis id `{0}`")]
    IdentifierMismatch(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("construction infeasible: {0}")]
    Infeasible(String),

    #[error("degenerate parameter: {0}")]
    Degenerate(String),

    #[error("adjusted p-values are not available for method `{0}`")]
    UnsupportedMethod(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("line {line}: {message}")]
    Table { line: u64, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
