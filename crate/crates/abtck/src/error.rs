//! Error types shared across the crate.
//!
//! Errors split into three families that the CLI maps onto exit codes:
//! configuration / I-O problems (exit 2), numerical failures inside the
//! linear algebra or the sampler (exit 1), and domain violations (exit 2).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Geometry violations: empty domains, inverted bounds, points outside
    /// the modeled input space.
    #[error("domain error: {0}")]
    Domain(String),

    /// Bad run configuration or inconsistent inputs.
    #[error("config error: {0}")]
    Config(String),

    /// A linear system could not be solved even after jitter escalation, or
    /// conjugate bookkeeping produced an impossible value. `context` names
    /// the leaf/level (and iteration, when inside the sampler).
    #[error("numerical error: {context}")]
    Numerical { context: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub fn numerical(context: impl Into<String>) -> Self {
        Error::Numerical {
            context: context.into(),
        }
    }

    /// Exit code the CLI should use for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
