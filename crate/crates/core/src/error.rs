use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Structural problem in an input file: wrong column count, bad encoding, bad JSON.
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    /// A label outside the task schema.
    #[error("{source_name}:{line}: unknown label {label:?} for schema {schema}")]
    UnknownLabel {
        source_name: String,
        line: usize,
        label: String,
        schema: String,
    },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("schema mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: String, found: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fold plan does not match corpus: {0}")]
    PlanMismatch(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("ids do not align; missing from predictions: {missing_in_pred:?}; unexpected: {extra_in_pred:?}")]
    IdMismatch {
        missing_in_pred: Vec<String>,
        extra_in_pred: Vec<String>,
    },

    #[error("backend {expected:?} cannot load checkpoint produced by {found:?}")]
    BackendMismatch { expected: String, found: String },

    #[error("checkpoint fingerprint mismatch: expected {expected}, found {found}")]
    FingerprintMismatch { expected: String, found: String },

    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("backend error: {0}")]
    Backend(String),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }
}
