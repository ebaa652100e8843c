use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("non-mono input: {channels} channels")]
    NonMono { channels: u16 },

    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("sample rate mismatch: expected {expected} Hz, got {actual} Hz")]
    RateMismatch { expected: u32, actual: u32 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("reference signal is identically zero")]
    ZeroReference,

    #[error("zero-power input: {0}")]
    ZeroPower(&'static str),

    #[error("noise sample too short: {noise} samples for {needed} required")]
    NoiseTooShort { noise: usize, needed: usize },

    #[error("signal too short: {len} samples, need at least {needed}")]
    SignalTooShort { len: usize, needed: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("malformed noise-shapes file: {0}")]
    BadShapesFile(String),

    #[error("wav error: {0}")]
    Wav(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
