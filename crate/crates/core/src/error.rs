//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by shaping, modeling, simulation and experiment code.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two quantities that must agree do not (e.g. rate bookkeeping).
    #[error("consistency error: {0}")]
    Consistency(String),

    /// Sequence lengths do not match.
    #[error("length mismatch: expected {expected}, got {got} ({context})")]
    LengthMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    /// Encoding or decoding failed (bad composition, inadmissible block, ...).
    #[error("codec error: {0}")]
    Codec(String),

    /// A shaper was configured with no admissible sequence.
    #[error("empty codebook: {0}")]
    EmptyCodebook(String),

    /// Invalid system or experiment configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Config file could not be parsed; message carries the field path.
    #[error("schema error: {0}")]
    Schema(String),

    /// A requested figure/axis is not covered by the run record.
    #[error("missing data: {0}")]
    MissingData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
