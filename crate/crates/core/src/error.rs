use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("schema conflict: {0}")]
    SchemaConflict(String),

    #[error("slot `{0}` is not part of the action space")]
    OutOfSpace(String),

    #[error("action index {index} out of range (space has {len} actions)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("unknown slot `{0}`")]
    UnknownSlot(String),

    #[error("{path}: record {index}: {message}")]
    Record {
        path: PathBuf,
        index: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("dialogue protocol violation: {0}")]
    Protocol(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("replay buffer holds {len} experiences, cannot sample {requested}")]
    BufferTooSmall { len: usize, requested: usize },

    #[error("warm start failed: no successful dialogue in {episodes} episodes")]
    WarmStartFailure { episodes: usize },

    #[error("transfer incompatible: {0}")]
    TransferIncompatible(String),

    #[error("at least {needed} samples required, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("goal list is empty")]
    EmptyGoals,
}

impl Error {
    /// True for errors caused by bad input files rather than runtime failure.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Schema(_)
                | Error::SchemaConflict(_)
                | Error::UnknownSlot(_)
                | Error::Record { .. }
                | Error::Io { .. }
                | Error::Json { .. }
                | Error::Csv(_)
                | Error::Config(_)
                | Error::EmptyGoals
                | Error::TransferIncompatible(_)
                | Error::Dimension { .. }
        )
    }
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_file(path: &std::path::Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
