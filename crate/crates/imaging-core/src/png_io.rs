//! 8-bit PNG ingestion and emission. PNG is the only image file format the
//! workbench reads or writes; float values are `byte / 255`.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};
use ndarray::Array3;

use crate::{ImageTensor, ImagingError, Result};

fn tensor_from_dynamic(img: DynamicImage) -> Result<ImageTensor> {
    match img {
        DynamicImage::ImageRgb8(buf) => {
            let (w, h) = buf.dimensions();
            let mut data = Array3::zeros((h as usize, w as usize, 3));
            for (x, y, px) in buf.enumerate_pixels() {
                for c in 0..3 {
                    data[[y as usize, x as usize, c]] = px.0[c] as f64 / 255.0;
                }
            }
            ImageTensor::from_array(data)
        }
        DynamicImage::ImageLuma8(buf) => {
            let (w, h) = buf.dimensions();
            let mut data = Array3::zeros((h as usize, w as usize, 1));
            for (x, y, px) in buf.enumerate_pixels() {
                data[[y as usize, x as usize, 0]] = px.0[0] as f64 / 255.0;
            }
            ImageTensor::from_array(data)
        }
        other => Err(ImagingError::UnsupportedPng(format!("{:?}", other.color()))),
    }
}

/// Read an 8-bit RGB or grayscale PNG from disk.
pub fn read_png(path: impl AsRef<Path>) -> Result<ImageTensor> {
    let bytes = std::fs::read(path)?;
    decode_png_bytes(&bytes)
}

/// Decode an 8-bit RGB or grayscale PNG from an in-memory buffer.
pub fn decode_png_bytes(bytes: &[u8]) -> Result<ImageTensor> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| ImagingError::PngDecode(e.to_string()))?;
    tensor_from_dynamic(img)
}

/// Write an image as 8-bit PNG; values are quantized as `round(v * 255)`.
pub fn write_png(path: impl AsRef<Path>, img: &ImageTensor) -> Result<()> {
    let (h, w) = (img.height() as u32, img.width() as u32);
    let to_byte = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let result = match img.channels() {
        3 => {
            let buf = ImageBuffer::from_fn(w, h, |x, y| {
                Rgb([
                    to_byte(img.data()[[y as usize, x as usize, 0]]),
                    to_byte(img.data()[[y as usize, x as usize, 1]]),
                    to_byte(img.data()[[y as usize, x as usize, 2]]),
                ])
            });
            buf.save_with_format(path.as_ref(), image::ImageFormat::Png)
        }
        1 => {
            let buf = ImageBuffer::from_fn(w, h, |x, y| {
                Luma([to_byte(img.data()[[y as usize, x as usize, 0]])])
            });
            buf.save_with_format(path.as_ref(), image::ImageFormat::Png)
        }
        c => return Err(ImagingError::UnsupportedChannels(c)),
    };
    result.map_err(|e| ImagingError::PngEncode(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn write_then_read_is_bit_exact_for_8bit_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let dir = tempfile::tempdir().unwrap();
        for (channels, name) in [(3usize, "rgb.png"), (1, "gray.png")] {
            let data = Array3::from_shape_fn((9, 13, channels), |_| {
                rng.random_range(0..=255u32) as f64 / 255.0
            });
            let img = ImageTensor::from_array(data).unwrap();
            let path = dir.path().join(name);
            write_png(&path, &img).unwrap();
            let back = read_png(&path).unwrap();
            assert_eq!(&back, &img);

            // A second write of the re-read image produces identical bytes.
            let path2 = dir.path().join(format!("again_{name}"));
            write_png(&path2, &back).unwrap();
            assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
        }
    }

    #[test]
    fn byte_scaling_convention() {
        let dir = tempfile::tempdir().unwrap();
        let mut data = Array3::zeros((8, 8, 1));
        data[[0, 0, 0]] = 1.0; // byte 255
        data[[0, 1, 0]] = 128.0 / 255.0; // byte 128
        let img = ImageTensor::from_array(data).unwrap();
        let path = dir.path().join("scale.png");
        write_png(&path, &img).unwrap();
        let back = read_png(&path).unwrap();
        assert_eq!(back.data()[[0, 0, 0]], 1.0);
        assert_eq!(back.data()[[0, 1, 0]], 128.0 / 255.0);
    }

    #[test]
    fn corrupt_file_is_a_decode_error() {
        assert!(matches!(
            decode_png_bytes(b"definitely not a png"),
            Err(ImagingError::PngDecode(_))
        ));
    }
}
