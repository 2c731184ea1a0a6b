//! Multilevel 2-D discrete wavelet transform with VisuShrink/BayesShrink
//! thresholding — the denoising stage of the restoration defense.
//!
//! The transform uses the orthogonal 8-tap Daubechies-4 filter pair with
//! periodic extension, which keeps subband shapes exactly dyadic and makes
//! the analysis operator orthogonal (so synthesis is its transpose and
//! reconstruction is exact to machine precision).

mod dwt;
mod shrink;

pub use dwt::{
    dwt2, idwt2, max_decomposition_depth, DetailBands, WaveletError, WaveletFamily,
    WaveletPyramid,
};
pub use shrink::{
    bayes_threshold, estimate_noise_sigma, hard_threshold, soft_threshold, visu_threshold,
    wavelet_denoise, NoiseSigma, ShrinkConfig, ShrinkMode, Thresholding,
};

pub type Result<T> = std::result::Result<T, WaveletError>;
