use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
///
/// The CLI maps variants onto exit codes: configuration problems
/// (`InvalidInput`, `AssumptionViolation`, `Parse`, `Validation`, `Io`)
/// exit with 2, `Internal` with 3. Verification failures are not errors;
/// they are report entries.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("assumption violation: {0}")]
    AssumptionViolation(String),

    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid scenario key `{key}`: {reason}")]
    Validation { key: String, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn invalid_input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn validation(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
