use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {format} data: {reason}")]
    Decode { format: &'static str, reason: String },

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("crop box exceeds the {edge} edge of the image ({detail})")]
    Range { edge: &'static str, detail: String },

    #[error("image is {width}x{height}, need at least {min_width}x{min_height}")]
    ImageSize {
        width: usize,
        height: usize,
        min_width: usize,
        min_height: usize,
    },

    #[error("size error: {0}")]
    Size(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("line {line}: {reason}")]
    Schema { line: usize, reason: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("degenerate training set: {0}")]
    DegenerateTraining(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("manifest line {line} ({path}): {source}")]
    Record {
        line: usize,
        path: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Process exit status for this error: 2 I/O or undecodable input,
    /// 3 image too small, 4 manifest or CSV schema, 5 configuration.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Decode { .. } | Error::UnsupportedFormat(_) => 2,
            Error::ImageSize { .. } | Error::Size(_) => 3,
            Error::Parse { .. } | Error::Schema { .. } | Error::EmptyInput(_) | Error::Range { .. } => 4,
            Error::Config(_) | Error::DegenerateTraining(_) => 5,
            Error::Argument(_) | Error::Shape { .. } => 1,
            Error::Record { source, .. } => source.exit_code(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
