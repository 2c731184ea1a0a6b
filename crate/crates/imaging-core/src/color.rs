//! Full-range BT.601 color transforms used by the restoration pipeline.

use ndarray::Array2;

use crate::{ImageTensor, ImagingError, Result};

/// Luma/chroma planes of an RGB image, all in `[0, 1]`.
///
/// Cb and Cr are offset by 0.5 so that an achromatic input maps to
/// `(g, 0.5, 0.5)`.
#[derive(Debug, Clone)]
pub struct YCbCrImage {
    pub y: Array2<f64>,
    pub cb: Array2<f64>,
    pub cr: Array2<f64>,
}

impl YCbCrImage {
    pub fn height(&self) -> usize {
        self.y.dim().0
    }

    pub fn width(&self) -> usize {
        self.y.dim().1
    }

    pub fn planes(&self) -> [&Array2<f64>; 3] {
        [&self.y, &self.cb, &self.cr]
    }

    pub fn planes_mut(&mut self) -> [&mut Array2<f64>; 3] {
        [&mut self.y, &mut self.cb, &mut self.cr]
    }
}

const KR: f64 = 0.299;
const KG: f64 = 0.587;
const KB: f64 = 0.114;

/// Full-range BT.601 analog transform. Invertible; chroma offset by 0.5.
pub fn rgb_to_ycbcr(img: &ImageTensor) -> Result<YCbCrImage> {
    if img.channels() != 3 {
        return Err(ImagingError::ChannelCount {
            expected: 3,
            got: img.channels(),
        });
    }
    let (h, w) = (img.height(), img.width());
    let data = img.data();
    let mut y = Array2::zeros((h, w));
    let mut cb = Array2::zeros((h, w));
    let mut cr = Array2::zeros((h, w));
    for i in 0..h {
        for j in 0..w {
            let (r, g, b) = (data[[i, j, 0]], data[[i, j, 1]], data[[i, j, 2]]);
            let luma = KR * r + KG * g + KB * b;
            y[[i, j]] = luma;
            cb[[i, j]] = 0.5 + (b - luma) / (2.0 * (1.0 - KB));
            cr[[i, j]] = 0.5 + (r - luma) / (2.0 * (1.0 - KR));
        }
    }
    Ok(YCbCrImage { y, cb, cr })
}

/// Exact inverse of [`rgb_to_ycbcr`] followed by a clamp to `[0, 1]`.
pub fn ycbcr_to_rgb(img: &YCbCrImage) -> ImageTensor {
    let (h, w) = img.y.dim();
    let mut planes = [Array2::zeros((h, w)), Array2::zeros((h, w)), Array2::zeros((h, w))];
    for i in 0..h {
        for j in 0..w {
            let y = img.y[[i, j]];
            let cb = img.cb[[i, j]] - 0.5;
            let cr = img.cr[[i, j]] - 0.5;
            let r = y + 2.0 * (1.0 - KR) * cr;
            let b = y + 2.0 * (1.0 - KB) * cb;
            let g = (y - KR * r - KB * b) / KG;
            planes[0][[i, j]] = r;
            planes[1][[i, j]] = g;
            planes[2][[i, j]] = b;
        }
    }
    ImageTensor::from_planes_clamped(planes).expect("planes share dimensions")
}
