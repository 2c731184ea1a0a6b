use thiserror::Error;

/// Errors produced by pixel-level operations.
#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("expected {expected} channels, got {got}")]
    ChannelCount { expected: usize, got: usize },

    #[error("unsupported channel count {0} (must be 1 or 3)")]
    UnsupportedChannels(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("resize factor {factor} does not map {dim} pixels to an integral size")]
    NonIntegralResize { factor: f64, dim: usize },

    #[error("resize factor must be positive and finite, got {0}")]
    BadResizeFactor(f64),

    #[error("image dimensions {h}x{w} below minimum {min}")]
    TooSmall { h: usize, w: usize, min: usize },

    #[error("png decode: {0}")]
    PngDecode(String),

    #[error("png encode: {0}")]
    PngEncode(String),

    #[error("unsupported png layout: {0} (need 8-bit RGB or grayscale)")]
    UnsupportedPng(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
