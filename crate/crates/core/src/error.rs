//! Crate-wide error type.

/// Errors reported by the estimation library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter or configuration value violates its stated bounds.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The input series is unusable; `index` is the offending observation.
    #[error("data error at index {index}: {message}")]
    Data { index: usize, message: String },

    /// An internal contract between modules was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A numerical procedure failed to produce a usable result.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn data(index: usize, msg: impl Into<String>) -> Self {
        Error::Data { index, message: msg.into() }
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
