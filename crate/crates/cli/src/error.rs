use std::path::{Path, PathBuf};

/// Failures of a command, each tied to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{}: {message}", path.display())]
    BadInput { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("invalid prior file {}: {message}", path.display())]
    InvalidPrior { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{failed} of {replicates} replicates had a failed fit")]
    StrictFailure { failed: usize, replicates: usize },
    #[error(transparent)]
    Core(#[from] rebias_core::Error),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use rebias_core::Error as E;
        match self {
            CliError::Parse { .. } | CliError::BadInput { .. } | CliError::Usage(_) => 2,
            CliError::InvalidPrior { .. } => 4,
            CliError::StrictFailure { .. } => 5,
            CliError::Io { .. } | CliError::Internal(_) => 1,
            CliError::Core(e) => match e {
                E::NotConverged { .. } => 3,
                E::InvalidPrior(_) => 4,
                E::NonPositiveVariance { .. } => 6,
                E::BracketFailure { .. } => 1,
                _ => 2,
            },
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn parse(path: &Path, line: u64, message: impl Into<String>) -> Self {
        CliError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    pub fn bad_input(path: &Path, message: impl Into<String>) -> Self {
        CliError::BadInput {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
