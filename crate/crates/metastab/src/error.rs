use thiserror::Error;

/// Failure categories shared by every module.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Input rejected before any numerics ran.
    #[error("validation failed: {0}")]
    Validation(String),
    /// A solver failed to converge or produced non-finite output.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}

pub(crate) fn numerical<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Numerical(msg.into()))
}
