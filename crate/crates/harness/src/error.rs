use std::path::PathBuf;

/// Errors of the harness; each maps to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config file not found: {}", .0.display())]
    MissingConfig(PathBuf),
    #[error("invalid config {}: {msg}", path.display())]
    BadConfig { path: PathBuf, msg: String },
    /// A command-line value outside its allowed range.
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error("non-finite metric {metric} = {value} at step {env_steps}")]
    NonFinite {
        metric: String,
        value: f64,
        env_steps: u64,
    },
    #[error(transparent)]
    Core(#[from] mackrl_core::Error),
}

impl HarnessError {
    /// 2 for invalid input, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::MissingConfig(_)
            | HarnessError::BadConfig { .. }
            | HarnessError::Usage(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
