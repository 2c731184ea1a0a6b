//! A small, deterministic neural-network substrate: convolutional layers
//! with exact hand-derived backprop, batch normalization, residual blocks,
//! pixel-shuffle upsampling, seeded initialization, SGD, and a single-file
//! checkpoint format.
//!
//! Design constraints that shaped this crate:
//!
//! - Gradients must be exact (they drive gradient-based attacks and are
//!   checked against finite differences), so every layer implements its
//!   adjoint explicitly.
//! - Training must be bit-reproducible for a fixed seed regardless of the
//!   rayon thread count. Batches are split into fixed-size chunks; each
//!   chunk is processed sequentially on one worker, and per-chunk results
//!   are reduced in chunk order. Batch-norm statistics are computed per
//!   chunk (ghost batches) so no cross-chunk coupling exists.
//! - Everything is generic over `f32`/`f64`; training runs in `f32`,
//!   numerical tests instantiate `f64`.

mod arena;
mod checkpoint;
mod conv;
mod graph;
mod loss;
mod net;
mod optim;

pub use arena::{ParamArena, ParamId};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use graph::{conv_output_dims, BnSpec, BnStatsUpdate, ConvSpec, DenseSpec, Mode, Node, Tape};
pub use loss::{accuracy, argmax_class, softmax, softmax_cross_entropy};
pub use net::{he_normal, Network, TrainStepStats, GHOST_BATCH};
pub use optim::{Sgd, SgdConfig};

use ndarray::NdFloat;

/// Scalar type bound for the whole substrate.
pub trait Scalar: NdFloat + Send + Sync + 'static {
    fn from_f64(v: f64) -> Self;
    fn to_f64_val(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64_val(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64_val(self) -> f64 {
        self
    }
}

/// Batches are always (N, C, H, W).
pub type Batch<F> = ndarray::Array4<F>;
