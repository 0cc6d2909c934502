use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: malformed record: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("duplicate news id `{0}`")]
    DuplicateId(String),

    #[error("news `{id}` is invalid: {reason}")]
    InvalidItem { id: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("news `{0}` has no tokens after tokenization")]
    EmptyTokens(String),

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("missing credibility for news `{0}`")]
    MissingCredibility(String),

    #[error("observation {value} for event {event} lies outside [0, 1]")]
    ObservationOutOfRange { event: u64, value: f64 },

    #[error("prior error covariance must be positive, got {0}")]
    NonPositiveCovariance(f64),

    #[error("training diverged: non-finite loss at update {update}, batch {batch} (learning rate too large?)")]
    NonFiniteLoss { update: usize, batch: usize },

    #[error("{0}")]
    Precondition(String),

    #[error("checkpoint version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("could not parse {what} at {path}: {message}")]
    Parse {
        what: &'static str,
        path: PathBuf,
        message: String,
    },

    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
