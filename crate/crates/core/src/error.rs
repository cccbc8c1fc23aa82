use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("csv line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("flow {key}: {message}")]
    FlowConflict { key: String, message: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("model format: {0}")]
    Format(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line()).unwrap_or(0);
        Error::Csv {
            line,
            message: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
