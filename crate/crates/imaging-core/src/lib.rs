//! Pixel-level primitives shared by the whole workbench: the image tensor
//! type, BT.601 color transforms, interpolation resampling (with exact
//! adjoints for gradient propagation), an orthonormal 2-D DCT, and PNG I/O.
//!
//! All operations are pure functions on immutable inputs and are safe to
//! call from concurrent workers.

mod color;
mod dct;
mod error;
mod png_io;
mod resize;
mod tensor;

pub use color::{rgb_to_ycbcr, ycbcr_to_rgb, YCbCrImage};
pub use dct::{dct2, idct2};
pub use error::ImagingError;
pub use png_io::{decode_png_bytes, read_png, write_png};
pub use resize::{
    interp_resize, resize_adjoint, resize_to, resize_with_strategy, InterpMethod, ResizeStrategy,
};
pub use tensor::ImageTensor;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, ImagingError>;
