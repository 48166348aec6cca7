use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] bodba::Error),
    /// Unreadable or invalid input data (traces, manifests, datasets).
    #[error("{0}")]
    Input(String),
    #[error("run task {task} seed {seed}: {message}")]
    Run { task: usize, seed: u64, message: String },
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for configuration problems, 3 for I/O, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Io { .. } => 3,
            HarnessError::Core(bodba::Error::Io(_)) => 3,
            HarnessError::Core(_) | HarnessError::Input(_) | HarnessError::Run { .. } => 1,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
