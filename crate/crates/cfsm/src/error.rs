//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide error enumeration.
///
/// Variants are grouped by what the caller can do about them: fix the input
/// (`InvalidInput`, `InvalidStage`, `Parse`), fix the configuration
/// (`InvalidConfig`), or treat the run as numerically failed (`Numeric`).
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a precondition (dimension mismatch,
    /// index out of range, non-finite coordinates, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A stage index is outside the range an operation supports.
    #[error("invalid stage {stage}: {reason}")]
    InvalidStage { stage: usize, reason: String },

    /// A configuration value is out of range or inconsistent.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A numerical routine failed (non-finite values, no convergence).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A data file is malformed; `line` is 1-based.
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid_input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn invalid_stage(stage: usize, reason: impl Into<String>) -> Self {
        Error::InvalidStage {
            stage,
            reason: reason.into(),
        }
    }

    pub fn invalid_config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
