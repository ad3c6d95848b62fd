//! Error type shared by every pipeline stage.

use thiserror::Error;

/// Errors produced by parsing, validation, configuration and numerics.
#[derive(Debug, Error)]
pub enum Error {
    /// A malformed input row or file. Line numbers are 1-based and include
    /// the header line for CSV inputs.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Structurally valid input that violates a data invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// An invalid parameter or an incompatible combination of options.
    #[error("configuration error: {0}")]
    Config(String),

    /// A computation that cannot produce a defined result.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// Process exit code class for this error: 1 usage, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Parse { .. } | Error::Validation(_) | Error::Io(_) | Error::Serde(_) => 2,
            Error::Numeric(_) => 3,
        }
    }

    /// Short machine-readable category tag, mirrors `exit_code`.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Validation(_) => "validation",
            Error::Config(_) => "config",
            Error::Numeric(_) => "numeric",
            Error::Io(_) => "io",
            Error::Serde(_) => "serialization",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.kind() {
            csv::ErrorKind::Io(_) => Error::Serde(e.to_string()),
            _ => {
                let line = e
                    .position()
                    .map(|p| p.line() as usize)
                    .unwrap_or_default();
                Error::Parse {
                    line,
                    message: e.to_string(),
                }
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
