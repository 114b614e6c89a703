//! Crate-wide error type, mapped to process exit codes by the CLI.

use thiserror::Error;

/// Failure categories surfaced by the library.
///
/// `Config` covers invalid user input (bad dimensions, masses that do not
/// normalize, malformed files). `Numeric` covers runtime numerical failures
/// (non-convergence, domain violations such as a non-positive eigenvalue).
/// `Io` wraps filesystem errors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// Exit code contract: validation 1, numeric 2, i/o 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Numeric(_) => 2,
            Error::Io(_) => 3,
        }
    }
}
