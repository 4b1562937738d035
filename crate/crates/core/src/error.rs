use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("{path}: line {line}, column {column}: {message}")]
    Format {
        path: PathBuf,
        line: u64,
        column: usize,
        message: String,
    },

    #[error("insufficient capacity: {0}")]
    Capacity(String),

    #[error("training diverged at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingInput(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// Process exit code for this error class: 2 config, 3 missing or bad
    /// input, 4 numeric failure, 5 shape mismatch.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parameter(_) | Error::Usage(_) | Error::Capacity(_) => 2,
            Error::MissingInput(_)
            | Error::Io { .. }
            | Error::Format { .. }
            | Error::Validation(_) => 3,
            Error::Training { .. } => 4,
            Error::Shape(_) => 5,
        }
    }
}
