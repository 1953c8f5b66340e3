use thiserror::Error;

/// Errors raised by the percolation, inference and design routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// An exact enumeration or other bounded computation would exceed its guard.
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    /// A text input could not be parsed.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
