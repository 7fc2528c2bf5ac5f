use std::path::PathBuf;

use lzfe_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 1 for numerical failures, 2 for bad input (including unreadable files).
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(
                CoreError::NonConvergence { .. }
                | CoreError::Unitarity { .. }
                | CoreError::StepUnderflow { .. },
            ) => 1,
            CliError::Csv(_) => 1,
            _ => 2,
        }
    }
}
