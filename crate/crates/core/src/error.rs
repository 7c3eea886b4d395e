use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KrdsError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error in {location}: {message}")]
    Validation { location: String, message: String },

    #[error("ontology mismatch: expected hash {expected}, found {found}")]
    OntologyMismatch { expected: String, found: String },

    #[error("unsupported format version {0}")]
    FormatVersion(u32),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite loss {loss} at batch item {index} (action {action}, target {target})")]
    NonFinite {
        loss: f64,
        index: usize,
        action: usize,
        target: f64,
    },

    #[error("session already finished")]
    SessionClosed,

    #[error("could not understand utterance: {0:?}")]
    Unparseable(String),

    #[error("language layer: {0}")]
    Language(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl KrdsError {
    pub(crate) fn validation(location: impl Into<String>, message: impl Into<String>) -> Self {
        KrdsError::Validation {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KrdsError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = KrdsError> = std::result::Result<T, E>;
