use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed image: {0}")]
    MalformedImage(String),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("image dimensions out of range: {width}x{height}")]
    DimensionsOutOfRange { width: usize, height: usize },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid detection index {index} (detector has {count} raw detections)")]
    InvalidDetection { index: usize, count: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("scene generation gave up after {attempts} attempts (seed {seed})")]
    SceneGeneration { seed: u64, attempts: u32 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("no successful attacks to average over")]
    NoSuccesses,

    #[error("unbalanced or insufficient data: {0}")]
    Unbalanced(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
