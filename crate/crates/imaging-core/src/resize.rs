//! Separable interpolation resampling with half-pixel-centered coordinates,
//! edge replication at the boundary, and exact adjoints.
//!
//! The adjoint is what gradient-based code needs to push a gradient with
//! respect to a resized image back onto the source pixels.

use ndarray::Array3;

use crate::{ImageTensor, ImagingError, Result};

/// Interpolation kernel selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InterpMethod {
    Nearest,
    Bilinear,
    /// Catmull-Rom cubic (a = -0.5).
    Bicubic,
}

impl InterpMethod {
    pub fn name(self) -> &'static str {
        match self {
            InterpMethod::Nearest => "nearest",
            InterpMethod::Bilinear => "bilinear",
            InterpMethod::Bicubic => "bicubic",
        }
    }
}

impl std::str::FromStr for InterpMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "nearest" => Ok(InterpMethod::Nearest),
            "bilinear" => Ok(InterpMethod::Bilinear),
            "bicubic" => Ok(InterpMethod::Bicubic),
            other => Err(format!("unknown interpolation method `{other}`")),
        }
    }
}

/// How a resize factor is applied when resizing is used as a defense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ResizeStrategy {
    /// Upsample only: output dims are factor times the input.
    Us,
    /// Upsample then downsample back to the original dims.
    UsDs,
    /// Downsample then upsample back to the original dims.
    DsUs,
}

impl std::str::FromStr for ResizeStrategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "us" | "US" => Ok(ResizeStrategy::Us),
            "us_ds" | "US_DS" => Ok(ResizeStrategy::UsDs),
            "ds_us" | "DS_US" => Ok(ResizeStrategy::DsUs),
            other => Err(format!("unknown resize strategy `{other}`")),
        }
    }
}

/// One output sample as a weighted sum of input samples along an axis.
#[derive(Debug, Clone)]
struct Taps {
    first: usize,
    weights: Vec<f64>,
}

/// Per-axis sampling plan: `taps[o]` lists the input taps for output `o`.
fn axis_plan(in_len: usize, out_len: usize, method: InterpMethod) -> Vec<Taps> {
    let scale = in_len as f64 / out_len as f64;
    (0..out_len)
        .map(|o| {
            // Half-pixel-centered source coordinate of output sample o.
            let src = (o as f64 + 0.5) * scale - 0.5;
            match method {
                InterpMethod::Nearest => {
                    let idx = (src + 0.5).floor().clamp(0.0, in_len as f64 - 1.0) as usize;
                    Taps {
                        first: idx,
                        weights: vec![1.0],
                    }
                }
                InterpMethod::Bilinear => {
                    let base = src.floor();
                    let t = src - base;
                    let i0 = clamp_idx(base, in_len);
                    let i1 = clamp_idx(base + 1.0, in_len);
                    merge_taps(&[(i0, 1.0 - t), (i1, t)])
                }
                InterpMethod::Bicubic => {
                    let base = src.floor();
                    let t = src - base;
                    let w = catmull_rom_weights(t);
                    let idx: Vec<usize> = (-1..=2)
                        .map(|k| clamp_idx(base + k as f64, in_len))
                        .collect();
                    merge_taps(&[
                        (idx[0], w[0]),
                        (idx[1], w[1]),
                        (idx[2], w[2]),
                        (idx[3], w[3]),
                    ])
                }
            }
        })
        .collect()
}

fn clamp_idx(i: f64, len: usize) -> usize {
    i.clamp(0.0, len as f64 - 1.0) as usize
}

/// Collapse duplicate indices produced by edge replication into dense taps.
fn merge_taps(pairs: &[(usize, f64)]) -> Taps {
    let first = pairs.iter().map(|&(i, _)| i).min().unwrap();
    let last = pairs.iter().map(|&(i, _)| i).max().unwrap();
    let mut weights = vec![0.0; last - first + 1];
    for &(i, w) in pairs {
        weights[i - first] += w;
    }
    Taps { first, weights }
}

/// Catmull-Rom weights for taps at offsets -1..2 from `floor(src)`.
fn catmull_rom_weights(t: f64) -> [f64; 4] {
    let a = -0.5;
    let w = |x: f64| {
        let x = x.abs();
        if x <= 1.0 {
            (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0
        } else if x < 2.0 {
            a * x * x * x - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a
        } else {
            0.0
        }
    };
    [w(t + 1.0), w(t), w(1.0 - t), w(2.0 - t)]
}

fn apply_rows(data: &Array3<f64>, plan: &[Taps]) -> Array3<f64> {
    let (h, _, c) = data.dim();
    let out_w = plan.len();
    let mut out = Array3::zeros((h, out_w, c));
    for y in 0..h {
        for (x, taps) in plan.iter().enumerate() {
            for ch in 0..c {
                let mut acc = 0.0;
                for (k, &w) in taps.weights.iter().enumerate() {
                    acc += w * data[[y, taps.first + k, ch]];
                }
                out[[y, x, ch]] = acc;
            }
        }
    }
    out
}

fn apply_cols(data: &Array3<f64>, plan: &[Taps]) -> Array3<f64> {
    let (_, w, c) = data.dim();
    let out_h = plan.len();
    let mut out = Array3::zeros((out_h, w, c));
    for (y, taps) in plan.iter().enumerate() {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (k, &wt) in taps.weights.iter().enumerate() {
                    acc += wt * data[[taps.first + k, x, ch]];
                }
                out[[y, x, ch]] = acc;
            }
        }
    }
    out
}

fn scatter_rows(grad: &Array3<f64>, plan: &[Taps], in_w: usize) -> Array3<f64> {
    let (h, _, c) = grad.dim();
    let mut out = Array3::zeros((h, in_w, c));
    for y in 0..h {
        for (x, taps) in plan.iter().enumerate() {
            for ch in 0..c {
                let g = grad[[y, x, ch]];
                for (k, &w) in taps.weights.iter().enumerate() {
                    out[[y, taps.first + k, ch]] += w * g;
                }
            }
        }
    }
    out
}

fn scatter_cols(grad: &Array3<f64>, plan: &[Taps], in_h: usize) -> Array3<f64> {
    let (_, w, c) = grad.dim();
    let mut out = Array3::zeros((in_h, w, c));
    for (y, taps) in plan.iter().enumerate() {
        for x in 0..w {
            for ch in 0..c {
                let g = grad[[y, x, ch]];
                for (k, &wt) in taps.weights.iter().enumerate() {
                    out[[taps.first + k, x, ch]] += wt * g;
                }
            }
        }
    }
    out
}

/// Resample to exact output dims. Values are clamped to `[0, 1]`.
pub fn resize_to(
    img: &ImageTensor,
    out_h: usize,
    out_w: usize,
    method: InterpMethod,
) -> Result<ImageTensor> {
    if out_h == 0 || out_w == 0 {
        return Err(ImagingError::ShapeMismatch("zero output dims".into()));
    }
    if out_h == img.height() && out_w == img.width() {
        return Ok(img.clone());
    }
    let row_plan = axis_plan(img.width(), out_w, method);
    let col_plan = axis_plan(img.height(), out_h, method);
    let mid = apply_rows(img.data(), &row_plan);
    let full = apply_cols(&mid, &col_plan);
    ImageTensor::from_array_clamped(full)
}

/// Adjoint of the linear resample map behind [`resize_to`] (without the
/// clamp): pushes a gradient at (out_h, out_w) back to (in_h, in_w).
pub fn resize_adjoint(
    grad: &Array3<f64>,
    in_h: usize,
    in_w: usize,
    method: InterpMethod,
) -> Array3<f64> {
    let (gh, gw, _) = grad.dim();
    if gh == in_h && gw == in_w {
        return grad.clone();
    }
    let row_plan = axis_plan(in_w, gw, method);
    let col_plan = axis_plan(in_h, gh, method);
    let mid = scatter_cols(grad, &col_plan, in_h);
    scatter_rows(&mid, &row_plan, in_w)
}

/// Scale by a rational factor; `factor * dims` must be integral.
pub fn interp_resize(img: &ImageTensor, factor: f64, method: InterpMethod) -> Result<ImageTensor> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(ImagingError::BadResizeFactor(factor));
    }
    let out_h = integral_dim(img.height(), factor)?;
    let out_w = integral_dim(img.width(), factor)?;
    resize_to(img, out_h, out_w, method)
}

fn integral_dim(dim: usize, factor: f64) -> Result<usize> {
    let exact = dim as f64 * factor;
    let rounded = exact.round();
    if (exact - rounded).abs() > 1e-9 || rounded < 1.0 {
        return Err(ImagingError::NonIntegralResize { factor, dim });
    }
    Ok(rounded as usize)
}

/// Apply a resize factor as a defense strategy: US keeps the scaled dims,
/// US_DS and DS_US return to the original dims.
pub fn resize_with_strategy(
    img: &ImageTensor,
    factor: f64,
    method: InterpMethod,
    strategy: ResizeStrategy,
) -> Result<ImageTensor> {
    match strategy {
        ResizeStrategy::Us => interp_resize(img, factor, method),
        ResizeStrategy::UsDs => {
            let up = interp_resize(img, factor, method)?;
            resize_to(&up, img.height(), img.width(), method)
        }
        ResizeStrategy::DsUs => {
            let down = interp_resize(img, 1.0 / factor, method)?;
            resize_to(&down, img.height(), img.width(), method)
        }
    }
}
