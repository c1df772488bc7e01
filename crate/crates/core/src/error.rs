use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: cannot decode image: {message}")]
    Image { path: PathBuf, message: String },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("no frames found in {0}")]
    EmptySequence(PathBuf),

    #[error("frame dimension mismatch: expected {expected:?}, got {got:?}{}", .path.as_ref().map(|p| format!(" in {}", p.display())).unwrap_or_default())]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
        path: Option<PathBuf>,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sequence too short: need at least {needed} frames, got {got}")]
    SequenceTooShort { needed: usize, got: usize },

    #[error("kernel of size {size} does not fit a {width}x{height} frame")]
    KernelTooLarge { size: usize, width: usize, height: usize },

    #[error("no quadrature partner for phase {0}")]
    MissingQuadrature(f64),

    #[error("frame index {frame} outside the ground-truth range")]
    FrameOutOfRange { frame: usize },

    #[error("{0}")]
    PropertyViolation(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for failures caused by the filesystem or undecodable inputs.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::Image { .. } | Error::Parse { .. } | Error::EmptySequence(_)
        )
    }
}
