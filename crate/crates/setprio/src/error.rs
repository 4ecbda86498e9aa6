use std::path::PathBuf;

/// Process exit codes of the `setprio` binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(i32)]
pub enum ExitCode {
    Success = 0,
    Io = 1,
    Validation = 2,
    NumericalAbort = 3,
    FdCheckFailed = 4,
    Internal = 5,
}

impl ExitCode {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Malformed JSON or a field of the wrong type; serde's message carries
    /// the line and column.
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {message}")]
    Validation { path: PathBuf, message: String },
    #[error("numerical abort at cycle {cycle}: {reason}")]
    Numerical { cycle: usize, reason: String },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),
}

impl AppError {
    pub fn validation(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        AppError::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            AppError::Io { .. } | AppError::Csv(_) | AppError::Json(_) => ExitCode::Io,
            AppError::Parse { .. } | AppError::Validation { .. } => ExitCode::Validation,
            AppError::Numerical { .. } => ExitCode::NumericalAbort,
        }
    }

    /// Maps a core error raised while loading `path`.
    pub fn from_core(path: impl Into<PathBuf>, err: setprio_core::Error) -> Self {
        match err {
            setprio_core::Error::NumericalAbort { cycle, reason } => AppError::Numerical { cycle, reason },
            other => AppError::validation(path, other.to_string()),
        }
    }
}
