use ndarray::{Array2, Array3};

use crate::{ImagingError, Result};

/// An H×W×C raster of pixel intensities in `[0, 1]`.
///
/// This is the universal currency between modules: clean images,
/// adversarial images and restored images all use it. Channels are either
/// 1 (grayscale) or 3 (RGB).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    data: Array3<f64>,
}

impl ImageTensor {
    /// Wrap an (H, W, C) array, clamping every value into `[0, 1]`.
    pub fn from_array_clamped(mut data: Array3<f64>) -> Result<Self> {
        let c = data.dim().2;
        if c != 1 && c != 3 {
            return Err(ImagingError::UnsupportedChannels(c));
        }
        data.mapv_inplace(|v| v.clamp(0.0, 1.0));
        Ok(Self { data })
    }

    /// Wrap an (H, W, C) array that is already known to be in range.
    /// Returns an error if any value falls outside `[0, 1]` or is not finite.
    pub fn from_array(data: Array3<f64>) -> Result<Self> {
        let c = data.dim().2;
        if c != 1 && c != 3 {
            return Err(ImagingError::UnsupportedChannels(c));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(ImagingError::ShapeMismatch(
                "pixel values outside [0,1]".into(),
            ));
        }
        Ok(Self { data })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(ImagingError::UnsupportedChannels(channels));
        }
        Ok(Self {
            data: Array3::zeros((height, width, channels)),
        })
    }

    /// Build a single-channel image from a plane, clamping into `[0, 1]`.
    pub fn from_plane_clamped(plane: Array2<f64>) -> Self {
        let (h, w) = plane.dim();
        let mut data = Array3::zeros((h, w, 1));
        for y in 0..h {
            for x in 0..w {
                data[[y, x, 0]] = plane[[y, x]].clamp(0.0, 1.0);
            }
        }
        Self { data }
    }

    /// Build an RGB image from three planes, clamping into `[0, 1]`.
    pub fn from_planes_clamped(planes: [Array2<f64>; 3]) -> Result<Self> {
        let (h, w) = planes[0].dim();
        for p in &planes {
            if p.dim() != (h, w) {
                return Err(ImagingError::ShapeMismatch(
                    "channel planes differ in size".into(),
                ));
            }
        }
        let mut data = Array3::zeros((h, w, 3));
        for (c, p) in planes.iter().enumerate() {
            for y in 0..h {
                for x in 0..w {
                    data[[y, x, c]] = p[[y, x]].clamp(0.0, 1.0);
                }
            }
        }
        Ok(Self { data })
    }

    pub fn height(&self) -> usize {
        self.data.dim().0
    }

    pub fn width(&self) -> usize {
        self.data.dim().1
    }

    pub fn channels(&self) -> usize {
        self.data.dim().2
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array3<f64> {
        self.data
    }

    /// Extract channel `c` as a standalone plane.
    pub fn plane(&self, c: usize) -> Array2<f64> {
        let (h, w, _) = self.data.dim();
        Array2::from_shape_fn((h, w), |(y, x)| self.data[[y, x, c]])
    }

    /// Number of pixels (H·W), the `n` of universal thresholding.
    pub fn pixel_count(&self) -> usize {
        self.height() * self.width()
    }

    /// Largest absolute per-pixel difference to another image of equal shape.
    pub fn linf_distance(&self, other: &ImageTensor) -> f64 {
        assert_eq!(self.data.dim(), other.data.dim(), "shape mismatch");
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Euclidean distance to another image of equal shape.
    pub fn l2_distance(&self, other: &ImageTensor) -> f64 {
        assert_eq!(self.data.dim(), other.data.dim(), "shape mismatch");
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}
