use std::path::PathBuf;

/// Failures of the harness, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(#[from] gavg_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    /// The run finished and its outputs were written, but a verdict failed.
    #[error("verdict failed: {0}")]
    Verdict(String),
}

impl AppError {
    pub fn config(msg: impl Into<String>) -> Self {
        AppError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 1,
            AppError::Numerical(_) | AppError::Verdict(_) => 2,
            AppError::Io { .. } => 3,
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;
