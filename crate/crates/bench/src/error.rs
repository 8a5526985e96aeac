use thiserror::Error;

/// Failure classes, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("numerical error: {0}")]
    Numerical(String),
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Io(_) => 3,
            BenchError::Numerical(_) => 4,
        }
    }

    pub(crate) fn config(path: &str, msg: impl std::fmt::Display) -> Self {
        if path.is_empty() {
            BenchError::Config(msg.to_string())
        } else {
            BenchError::Config(format!("{path}: {msg}"))
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        BenchError::Io(format!("{}: {err}", path.display()))
    }
}

impl From<trlinucb::Error> for BenchError {
    fn from(e: trlinucb::Error) -> Self {
        if e.is_numerical() {
            BenchError::Numerical(e.to_string())
        } else {
            BenchError::Config(e.to_string())
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
