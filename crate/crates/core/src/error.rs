//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by loaders, algorithms and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A text input could not be parsed; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A single precondition or argument check failed.
    #[error("validation error: {0}")]
    Validation(String),

    /// Total config validation: every problem found, each tagged with the
    /// offending field path.
    #[error("invalid config:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    /// Serialization / deserialization failure.
    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
