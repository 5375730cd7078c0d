use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Structured text (model output or file) that does not conform to the
    /// expected format. `raw` keeps the offending text for logging.
    #[error("parse error ({context}): {detail}")]
    Parse {
        context: String,
        detail: String,
        raw: String,
    },

    #[error("graph failed validation: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("gateway error: {0}")]
    Gateway(String),

    /// A transient provider failure that the gateway may retry.
    #[error("transport error: {0}")]
    Transport(String),

    #[error("scripted provider has no fixture for key {key}")]
    FixtureMiss { key: String },

    #[error("extraction failed: {0}")]
    Extraction(String),

    #[error("{chunk_id}: {source}")]
    Chunk {
        chunk_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("library operation failed: unknown skill id {id}")]
    UnknownSkill { id: String },

    #[error("rollout {index} failed: {source}")]
    Rollout {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("reflection failed: {0}")]
    Reflection(String),

    #[error("matching failed: {0}")]
    Matching(String),

    #[error("fact verification failed: {0}")]
    Verification(String),

    #[error("evidence retrieval failed: {0}")]
    Retrieval(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(context: impl Into<String>, detail: impl Into<String>, raw: &str) -> Self {
        Error::Parse {
            context: context.into(),
            detail: detail.into(),
            raw: raw.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// The fixture key if this error (or the error it wraps) is a scripted miss.
    pub fn fixture_miss_key(&self) -> Option<&str> {
        match self {
            Error::FixtureMiss { key } => Some(key),
            Error::Rollout { source, .. } | Error::Chunk { source, .. } => source.fixture_miss_key(),
            _ => None,
        }
    }
}
