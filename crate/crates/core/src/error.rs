use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("dimension mismatch for {id}: expected {expected}, found {found}")]
    DimensionMismatch { id: String, expected: usize, found: usize },

    #[error("duplicate image id {0}")]
    DuplicateId(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("landmark set for {id} has {found} points, expected 68")]
    LandmarkCount { id: String, found: usize },

    #[error("unsupported image format: {0}")]
    UnsupportedImage(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("cannot normalize zero vector{}", .0.as_ref().map(|id| format!(" ({id})")).unwrap_or_default())]
    ZeroVector(Option<String>),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("query {query}: k={k} exceeds {eligible} eligible rows")]
    KTooLarge { query: String, k: usize, eligible: usize },

    #[error("unknown image id {0}")]
    UnknownId(String),

    #[error("source {0} has no other image of its identity to use as probe")]
    NoProbe(String),

    #[error("source {source_id}: only {available} filler candidates, need 5")]
    InsufficientFillers { source_id: String, available: usize },

    #[error("missing embedding for {0}")]
    MissingEmbedding(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training data contains a single class")]
    SingleClass,

    #[error("requested {requested} majority samples but only {available} are available")]
    InsufficientMajority { requested: usize, available: usize },

    #[error("class {class} has {count} samples, need at least {needed}")]
    ClassTooSmall { class: u8, count: usize, needed: usize },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("restoration hook: {0}")]
    Hook(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
