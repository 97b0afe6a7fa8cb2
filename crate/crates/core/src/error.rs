use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic {found:?}, expected \"LFSF\"")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },

    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error("duplicate key (patient {patient_id}, recording {recording_id})")]
    DuplicateKey { patient_id: String, recording_id: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    #[error("non-finite activation in {stage} (layer {layer})")]
    NonFiniteActivation { stage: &'static str, layer: usize },

    #[error("non-finite gradient in parameter {name}")]
    NonFiniteGradient { name: String },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("filter design unstable after {retries} attempts")]
    UnstableFilter { retries: usize },

    #[error("wav error: {0}")]
    Wav(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("id mismatch: {0}")]
    IdMismatch(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

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
}
