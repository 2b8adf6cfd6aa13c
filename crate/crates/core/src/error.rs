use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("length mismatch in {context}: expected {expected}, got {actual}")]
    LengthMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("unknown parameter group `{0}`")]
    UnknownGroup(String),

    #[error("non-finite value encountered in {0}")]
    Diverged(&'static str),

    #[error("unsupported snapshot version {found} (supported: {supported})")]
    SnapshotVersion { found: u32, supported: u32 },

    #[error("malformed snapshot: {0}")]
    MalformedSnapshot(String),

    #[error("idx parse error: {0}")]
    Idx(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
