use std::io;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("parse error at line {line}{}: {message}", column.map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse {
        line: usize,
        column: Option<usize>,
        message: String,
    },

    #[error("invalid tag {0:?}")]
    InvalidTag(String),

    #[error("invalid IOB2 sequence at index {index}: {message}")]
    InvalidIob { index: usize, message: String },

    #[error("invalid sentence: {0}")]
    InvalidSentence(String),

    #[error("overlapping spans {first} and {second}")]
    OverlappingSpans { first: String, second: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty training data")]
    EmptyData,

    #[error("non-finite objective at epoch {epoch}: {detail}")]
    NonFinite { epoch: usize, detail: String },

    #[error("{0}")]
    Singular(String),

    #[error("entity {0:?} missing from frequency table")]
    MissingEntity(String),

    #[error("token sequences differ at sentence {sentence}, position {position}")]
    TokenMismatch { sentence: usize, position: usize },

    #[error("corpora are misaligned at sentence {sentence}: {message}")]
    Misaligned { sentence: usize, message: String },

    #[error("model format error: {0}")]
    Model(String),

    #[error("configuration invalid:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("{0}")]
    Invalid(String),

    #[error("{}: {source}", path.display())]
    File {
        path: std::path::PathBuf,
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Attaches the file that was being read or written.
    pub fn in_file(self, path: impl Into<std::path::PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// True for configuration problems detected before any work is done.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config(_))
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column: None,
            message: message.into(),
        }
    }
}
