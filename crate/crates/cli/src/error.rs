use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] mehk_core::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("missing input: {0}")]
    Missing(String),
    #[error("no design passed the threshold {theta} in replicate(s) {replicates:?}; lower `selection.threshold` and rerun `select`")]
    EmptySelection { theta: f64, replicates: Vec<usize> },
    #[error("{failed} training cell(s) failed; see the status column of train/summary.csv")]
    TrainFailures { failed: usize },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    /// Process exit status.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::EmptySelection { .. } => 3,
            Self::Missing(_) => 4,
            Self::Checkpoint(_) => 5,
            Self::TrainFailures { .. } => 6,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
