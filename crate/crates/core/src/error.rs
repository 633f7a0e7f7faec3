use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A malformed input row; `row` is 1-based and counts the header as row 1.
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("design matrix is rank deficient; dependent columns: {columns:?}")]
    SingularFit { columns: Vec<usize> },

    #[error("matrix factorization failed: {0}")]
    Factorization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
