use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised while ingesting resources or running pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("dimension mismatch: expected {expected}, found {found} (line {line})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        line: usize,
    },

    #[error("duplicate token `{0}`")]
    DuplicateToken(String),

    #[error("zero vector for token `{0}`")]
    ZeroVector(String),

    #[error("non-finite value for token `{0}`")]
    NonFinite(String),

    #[error("unknown word id {0}")]
    UnknownWordId(usize),

    #[error("word `{0}` is not in the vocabulary")]
    UnknownWord(String),

    #[error("duplicate synset id `{0}`")]
    DuplicateSynset(String),

    #[error("synset `{from}` has a dangling relation to unknown synset `{to}`")]
    DanglingRelation { from: String, to: String },

    #[error("unknown synset `{0}`")]
    UnknownSynset(String),

    #[error("empty word list")]
    EmptyList,

    #[error("word vectors cancel to a zero-norm sum")]
    ZeroSum,

    #[error("synset `{0}` has no computable representation")]
    Unscorable(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
