use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Everything the IO layer and CLI can fail with.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("{0}")]
    Core(#[from] tristream_core::Error),

    #[error("sidecar line {line}{}: {reason}", column.map(|c| format!(", column {c}")).unwrap_or_default())]
    Sidecar {
        line: u64,
        column: Option<usize>,
        reason: String,
    },

    #[error("malformed .trs at byte offset {offset}: {reason}")]
    Trs { offset: u64, reason: String },

    #[error("malformed image: {0}")]
    Image(String),

    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("{}: malformed JSON: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },

    #[error("missing artifacts: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingArtifacts(Vec<PathBuf>),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Process exit codes: bad input, bad file format, internal failure.
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_FORMAT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

impl Error {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use tristream_core::Error as C;
        match self {
            Error::Io { .. } | Error::Input(_) | Error::MissingArtifacts(_) => EXIT_INPUT,
            Error::Sidecar { .. } | Error::Trs { .. } | Error::Image(_) | Error::Config { .. } | Error::Json { .. } => {
                EXIT_FORMAT
            }
            Error::Internal(_) => EXIT_INTERNAL,
            Error::Core(e) => match e {
                C::NonFiniteLoss | C::Diverged { .. } => EXIT_INTERNAL,
                C::MixedMotionScale { .. }
                | C::SidecarBlockOutsideFrame { .. }
                | C::UnsupportedSidecarSource { .. }
                | C::MissingSidecarFrame { .. } => EXIT_FORMAT,
                _ => EXIT_INPUT,
            },
        }
    }
}
