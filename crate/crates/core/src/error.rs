use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A block partition is malformed or incompatible with the request.
    #[error("partition error: {0}")]
    Partition(String),

    /// Input data could not be used (shape mismatch, non-finite entries).
    #[error("data error: {0}")]
    Data(String),

    /// A matrix that must be positive definite failed to factor.
    #[error("factorization failed for {what}: matrix is not numerically positive definite")]
    Factorization { what: String },

    /// A statistic is undefined for the given input.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures caused by the numbers rather than the request:
    /// singular matrices and degenerate statistics.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Factorization { .. } | Error::Degenerate(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
