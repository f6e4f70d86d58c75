//! Error type shared by all toolkit modules.

use std::io;
use thiserror::Error;

/// Errors produced by tensor I/O, spectral analysis, clustering and metrics.
#[derive(Debug, Error)]
pub enum FragError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// File does not start with the `FRAG0001` magic tag.
    #[error("bad magic tag in {path}")]
    BadMagic { path: String },

    /// Header version is not one this build understands.
    #[error("unsupported tensor format version {version}")]
    UnsupportedVersion { version: u32 },

    /// Payload ended before `L*W*H*C` values were read.
    #[error("truncated payload: expected {expected} values, got {actual}")]
    TruncatedPayload { expected: usize, actual: usize },

    /// Payload continues past the declared tensor size.
    #[error("trailing bytes after payload of {expected} values")]
    TrailingBytes { expected: usize },

    /// A tensor value is NaN or infinite.
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    /// Image file is not binary PGM (P5) / PPM (P6) with maxval 255.
    #[error("unsupported image format: {0}")]
    UnsupportedImage(String),

    /// Differential spectrum carries no mass in the positive quadrant.
    #[error("degenerate input: positive-quadrant spectrum mass is zero")]
    DegenerateInput,

    /// A parameter is outside its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown pattern id: {0}")]
    UnknownPattern(String),
}

impl FragError {
    /// Stable machine-readable code for each error class.
    pub fn code(&self) -> &'static str {
        match self {
            FragError::Io(_) => "io",
            FragError::BadMagic { .. } => "bad-magic",
            FragError::UnsupportedVersion { .. } => "unsupported-version",
            FragError::TruncatedPayload { .. } => "truncated-payload",
            FragError::TrailingBytes { .. } => "trailing-bytes",
            FragError::NonFinite { .. } => "non-finite",
            FragError::DimMismatch(_) => "dim-mismatch",
            FragError::UnsupportedImage(_) => "unsupported-image",
            FragError::DegenerateInput => "degenerate-input",
            FragError::InvalidArgument(_) => "invalid-argument",
            FragError::UnknownPattern(_) => "unknown-pattern",
        }
    }
}

pub type Result<T> = std::result::Result<T, FragError>;
