use std::path::{Path, PathBuf};

use embdistill_core::Error as CoreError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Exit status for a bad configuration or command line.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for unreadable or malformed input data.
pub const EXIT_DATA: i32 = 3;
/// Exit status for numeric divergence.
pub const EXIT_DIVERGENCE: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Malformed file content; `line` is 1-based when known.
    #[error("{}{}: {message}", path.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
    Format {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },
    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => EXIT_CONFIG,
            Error::Io { .. } | Error::Format { .. } => EXIT_DATA,
            Error::Core(e) => match e {
                CoreError::Config(_) | CoreError::Parameter(_) => EXIT_CONFIG,
                CoreError::Divergence { .. } | CoreError::AllDiverged(_) => EXIT_DIVERGENCE,
                _ => EXIT_DATA,
            },
        }
    }
}
