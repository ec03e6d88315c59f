//! Error types shared across the crate.

use thiserror::Error;

/// Everything that can go wrong inside the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Policy weights or derived quantities stopped being finite.
    #[error("numerical state error: {0}")]
    NumericalState(String),

    /// A reward group was too small or inconsistently sized.
    #[error("invalid group: {0}")]
    InvalidGroup(String),

    /// Cached per-token log-probabilities do not line up with the tokens.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// A prompt cannot fit within the configured maximum length.
    #[error("prompt too long: {0}")]
    PromptTooLong(String),

    /// An operation received an empty or otherwise unusable input.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration field failed validation.
    #[error("config error: field `{field}`: {message}")]
    Config { field: String, message: String },

    /// A scalar argument fell outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A metric was requested over an empty batch.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// A checkpoint file failed to parse or verify.
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    /// Training aborted mid-run (e.g. non-finite gradient).
    #[error("training aborted at iteration {iteration}: {message}")]
    TrainingAbort { iteration: u64, message: String },

    /// I/O failure, annotated with the path involved.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
