//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed input data (NaN prices, ragged matrices, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// A configuration is internally inconsistent or violates a guard.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numeric routine failed to converge or produced unusable output.
    /// Carries the residuals observed when the failure was in a solver.
    #[error("numeric error: {message}{}", format_residuals(residuals))]
    Numeric {
        message: String,
        residuals: Vec<f64>,
    },

    /// Command-line / config-file usage problems.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric {
            message: msg.into(),
            residuals: Vec::new(),
        }
    }
    pub fn numeric_with_residuals(msg: impl Into<String>, residuals: Vec<f64>) -> Self {
        Error::Numeric {
            message: msg.into(),
            residuals,
        }
    }
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    /// Process exit code for the CLI: 2 usage, 3 runtime/numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) => 2,
            _ => 3,
        }
    }
}

fn format_residuals(residuals: &[f64]) -> String {
    if residuals.is_empty() {
        String::new()
    } else {
        format!(" (residuals: {residuals:?})")
    }
}
