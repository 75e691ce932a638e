use thiserror::Error;

use crate::lm::LmParameters;

/// Errors surfaced by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("ingest error: {0}")]
    Ingest(String),

    #[error("malformed record: {0}")]
    Parse(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("provider contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("digest mismatch for {path}: expected {expected}, found {actual}")]
    DigestMismatch {
        path: String,
        expected: String,
        actual: String,
    },

    /// Training produced a non-finite loss. Carries the parameters from the
    /// last epoch that finished with a finite loss.
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize, last_good: Box<LmParameters> },
}

impl Error {
    /// Stable machine-readable identifier used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Ingest(_) => "ingest",
            Error::Parse(_) => "parse",
            Error::Domain(_) => "domain",
            Error::Contract(_) => "contract",
            Error::Config(_) => "config",
            Error::DigestMismatch { .. } => "digest_mismatch",
            Error::Diverged { .. } => "diverged",
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
