//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Mathematical precondition violated (zero-norm quaternion, empty database, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid configuration or incompatible shapes/sizes.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed text input (mesh files).
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Malformed binary file (bad magic, version, truncation).
    #[error("format error: {0}")]
    Format(String),

    /// Numerical failure during training (NaN loss or gradients).
    #[error("training error: {0}")]
    Training(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 2 for usage/config/data errors, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Training(_) => 3,
            _ => 2,
        }
    }
}
