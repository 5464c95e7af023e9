use std::fmt;
use std::path::PathBuf;

use crate::concept::ConceptId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("concept `{0}` is not in the knowledge graph")]
    MissingConcept(ConceptId),

    #[error("concept `{0}` has no embedding")]
    MissingEmbedding(ConceptId),

    #[error("invalid concept name {0:?}")]
    InvalidConcept(String),

    #[error("no valid assertions ingested ({skipped} records rejected)")]
    EmptyGraph { skipped: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid configuration structure: {0}")]
    Structure(String),

    #[error("configuration is not a member of the ensemble")]
    NotInEnsemble,

    #[error("degenerate bounding box {0:?}")]
    DegenerateBox([f64; 4]),

    #[error("length mismatch: {left} predictions vs {right} labels")]
    LengthMismatch { left: usize, right: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Record(RecordError),

    #[error("{path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
}

/// A single rejected input line. Ingestion keeps going past these and hands
/// them back alongside the result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    pub line: usize,
    pub message: String,
}

impl RecordError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl Error {
    /// Attaches the file an error came from. I/O errors already name it.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        match self {
            e @ (Error::Io { .. } | Error::Input { .. }) => e,
            e => Error::Input {
                path: path.into(),
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
