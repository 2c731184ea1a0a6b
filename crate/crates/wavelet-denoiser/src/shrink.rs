//! Threshold selection (VisuShrink, BayesShrink) and coefficient shrinkage,
//! plus the full image denoising pass.

use imaging_core::{rgb_to_ycbcr, ycbcr_to_rgb, ImageTensor};
use ndarray::Array2;

use crate::dwt::{dwt2, idwt2, max_decomposition_depth, WaveletError, WaveletFamily};
use crate::Result;

/// How the detail coefficients are shrunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Thresholding {
    Soft,
    Hard,
}

/// Threshold selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShrinkMode {
    /// Per-subband threshold from the noise/signal variance decomposition.
    Bayes,
    /// Universal threshold sigma * sqrt(2 ln n) shared by all subbands.
    Visu,
}

/// Noise level: fixed in pixel units, or estimated from the finest HH band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSigma {
    Fixed(f64),
    Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkConfig {
    pub mode: ShrinkMode,
    pub thresholding: Thresholding,
    pub sigma: NoiseSigma,
    pub depth: usize,
    pub family: WaveletFamily,
}

impl Default for ShrinkConfig {
    fn default() -> Self {
        Self {
            mode: ShrinkMode::Bayes,
            thresholding: Thresholding::Soft,
            sigma: NoiseSigma::Fixed(0.04),
            depth: 2,
            family: WaveletFamily::Db4,
        }
    }
}

impl ShrinkConfig {
    pub fn validate(&self) -> Result<()> {
        if let NoiseSigma::Fixed(s) = self.sigma {
            if s < 0.0 {
                return Err(WaveletError::NegativeSigma(s));
            }
        }
        if self.depth == 0 {
            return Err(WaveletError::ZeroDepth);
        }
        Ok(())
    }
}

/// Soft shrinkage: sign(x) * max(|x| - t, 0), with D(0, t) = 0.
pub fn soft_threshold(coeffs: &mut Array2<f64>, t: f64) -> Result<()> {
    if t < 0.0 {
        return Err(WaveletError::NegativeThreshold(t));
    }
    coeffs.mapv_inplace(|x| x.signum() * (x.abs() - t).max(0.0));
    Ok(())
}

/// Hard shrinkage: keep x where |x| >= t, zero elsewhere.
pub fn hard_threshold(coeffs: &mut Array2<f64>, t: f64) -> Result<()> {
    if t < 0.0 {
        return Err(WaveletError::NegativeThreshold(t));
    }
    coeffs.mapv_inplace(|x| if x.abs() >= t { x } else { 0.0 });
    Ok(())
}

/// Universal (VisuShrink) threshold sigma * sqrt(2 ln n) for n pixels.
pub fn visu_threshold(pixel_count: usize, sigma: f64) -> f64 {
    if pixel_count == 0 {
        return 0.0;
    }
    sigma * (2.0 * (pixel_count as f64).ln()).sqrt()
}

/// BayesShrink per-subband threshold.
///
/// The subband variance of the noisy signal is estimated as the mean of
/// squared coefficients; the clean-signal deviation follows from the
/// additive decomposition, and the threshold is sigma^2 over it. When the
/// noise variance swallows the whole subband the threshold is max|W|,
/// which zeroes the subband under soft thresholding.
pub fn bayes_threshold(subband: &Array2<f64>, sigma: f64) -> Result<f64> {
    if sigma < 0.0 {
        return Err(WaveletError::NegativeSigma(sigma));
    }
    if subband.is_empty() {
        return Err(WaveletError::EmptySubband);
    }
    let m = subband.len() as f64;
    let var_noisy = subband.iter().map(|v| v * v).sum::<f64>() / m;
    let var_noise = sigma * sigma;
    if var_noise < var_noisy {
        let sigma_clean = (var_noisy - var_noise).sqrt();
        if sigma_clean == 0.0 {
            return Ok(0.0);
        }
        Ok(var_noise / sigma_clean)
    } else {
        Ok(subband.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
    }
}

/// Robust noise estimate from the finest diagonal subband:
/// median(|HH1|) / 0.6745.
pub fn estimate_noise_sigma(hh1: &Array2<f64>) -> f64 {
    if hh1.is_empty() {
        return 0.0;
    }
    let mut mags: Vec<f64> = hh1.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = mags.len();
    let median = if n % 2 == 1 {
        mags[n / 2]
    } else {
        0.5 * (mags[n / 2 - 1] + mags[n / 2])
    };
    median / 0.6745
}

fn denoise_plane(plane: &Array2<f64>, cfg: &ShrinkConfig) -> Result<Array2<f64>> {
    let (h, w) = plane.dim();
    // Depth is clamped so the pipeline never rejects small-but-valid images.
    let depth = cfg.depth.min(max_decomposition_depth(h, w, cfg.family));
    if depth == 0 {
        return Ok(plane.clone());
    }
    let mut pyr = dwt2(plane, cfg.family, depth)?;
    let sigma = match cfg.sigma {
        NoiseSigma::Fixed(s) => s,
        NoiseSigma::Estimate => estimate_noise_sigma(&pyr.details[0].hh),
    };
    if sigma < 0.0 {
        return Err(WaveletError::NegativeSigma(sigma));
    }
    let visu = visu_threshold(h * w, sigma);
    for level in &mut pyr.details {
        for band in level.bands_mut() {
            let t = match cfg.mode {
                ShrinkMode::Visu => visu,
                ShrinkMode::Bayes => bayes_threshold(band, sigma)?,
            };
            match cfg.thresholding {
                Thresholding::Soft => soft_threshold(band, t)?,
                Thresholding::Hard => hard_threshold(band, t)?,
            }
        }
    }
    Ok(idwt2(&pyr))
}

/// Denoise an image in the wavelet domain.
///
/// RGB images are converted to YCbCr first and every channel is denoised
/// with the same noise level; grayscale images are processed directly.
/// Detail subbands are shrunk, the approximation subband is left untouched,
/// and the result is clamped back into `[0, 1]`.
pub fn wavelet_denoise(img: &ImageTensor, cfg: &ShrinkConfig) -> Result<ImageTensor> {
    cfg.validate()?;
    if img.channels() == 3 {
        let mut ycc = rgb_to_ycbcr(img)?;
        for plane in ycc.planes_mut() {
            *plane = denoise_plane(plane, cfg)?;
        }
        Ok(ycbcr_to_rgb(&ycc))
    } else {
        let out = denoise_plane(&img.plane(0), cfg)?;
        Ok(ImageTensor::from_plane_clamped(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn soft_threshold_closed_form() {
        let mut c = Array2::from_elem((1, 1), 0.5);
        soft_threshold(&mut c, 0.2).unwrap();
        assert!((c[[0, 0]] - 0.3).abs() < 1e-15);

        let mut c = Array2::from_elem((1, 1), -0.5);
        soft_threshold(&mut c, 0.2).unwrap();
        assert!((c[[0, 0]] + 0.3).abs() < 1e-15);
    }

    #[test]
    fn soft_threshold_kills_small_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = 0.3;
        let mut c = Array2::from_shape_fn((8, 8), |_| (rng.random::<f64>() - 0.5) * 2.0 * t);
        soft_threshold(&mut c, t).unwrap();
        assert!(c.iter().all(|v| *v == 0.0 || v.abs() > 0.0));
        let mut small = Array2::from_elem((2, 2), 0.29);
        soft_threshold(&mut small, t).unwrap();
        assert!(small.iter().all(|v| *v == 0.0));
    }

    // The paper's multiplicative form max(0, 1 - t/|x|) x versus the
    // sign-max form; they must agree exactly for nonzero x.
    #[test]
    fn soft_threshold_dual_formula_agreement() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let x: f64 = (rng.random::<f64>() - 0.5) * 4.0;
            let t: f64 = rng.random::<f64>();
            if x == 0.0 {
                continue;
            }
            let multiplicative = (1.0 - t / x.abs()).max(0.0) * x;
            let mut arr = Array2::from_elem((1, 1), x);
            soft_threshold(&mut arr, t).unwrap();
            assert!((arr[[0, 0]] - multiplicative).abs() <= 1e-12);
        }
    }

    #[test]
    fn negative_threshold_is_config_error() {
        let mut c = Array2::zeros((2, 2));
        assert!(soft_threshold(&mut c, -0.1).is_err());
        assert!(hard_threshold(&mut c, -0.1).is_err());
    }

    #[test]
    fn hard_threshold_keeps_large_untouched() {
        let mut c = Array2::from_elem((1, 2), 0.0);
        c[[0, 0]] = 0.9;
        c[[0, 1]] = 0.1;
        hard_threshold(&mut c, 0.5).unwrap();
        assert_eq!(c[[0, 0]], 0.9);
        assert_eq!(c[[0, 1]], 0.0);
    }

    #[test]
    fn visu_threshold_examples() {
        assert_eq!(visu_threshold(100, 0.0), 0.0);
        assert_eq!(visu_threshold(1, 0.5), 0.0);
        // Direct arithmetic: 0.04 * sqrt(2 ln 65536)
        let t = visu_threshold(65536, 0.04);
        assert!((t - 0.1883854).abs() < 1e-6, "{t}");
    }

    #[test]
    fn bayes_threshold_examples() {
        // sigma = 0 -> threshold 0.
        let band = Array2::from_elem((4, 4), 0.1);
        assert_eq!(bayes_threshold(&band, 0.0).unwrap(), 0.0);

        // Mean square 0.01, sigma 0.04: t = 0.0016 / sqrt(0.0084).
        let band = Array2::from_elem((8, 8), 0.1);
        let t = bayes_threshold(&band, 0.04).unwrap();
        assert!((t - 0.0174575).abs() < 1e-6, "{t}");

        // Noise variance at or above the subband mean square: kill-all.
        let mut band = Array2::from_elem((2, 2), 0.01);
        band[[1, 1]] = -0.03;
        let t = bayes_threshold(&band, 0.5).unwrap();
        assert_eq!(t, 0.03);
    }

    fn random_rgb(h: usize, w: usize, seed: u64) -> ImageTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageTensor::from_array(Array3::from_shape_fn((h, w, 3), |_| rng.random::<f64>()))
            .unwrap()
    }

    #[test]
    fn zero_sigma_bayes_is_identity_within_1e5() {
        let img = random_rgb(32, 32, 3);
        let cfg = ShrinkConfig {
            sigma: NoiseSigma::Fixed(0.0),
            ..Default::default()
        };
        let out = wavelet_denoise(&img, &cfg).unwrap();
        assert!(img.linf_distance(&out) < 1e-5);
        // And denoising the output again changes nothing further.
        let out2 = wavelet_denoise(&out, &cfg).unwrap();
        assert!(out.linf_distance(&out2) < 1e-5);
    }

    #[test]
    fn denoising_improves_psnr_on_synthetic_noise() {
        // A smooth image plus Gaussian noise; BayesShrink at the true sigma
        // must beat the noisy input.
        let (h, w) = (64, 64);
        let clean = ImageTensor::from_array(Array3::from_shape_fn((h, w, 3), |(y, x, c)| {
            let fy = y as f64 / h as f64;
            let fx = x as f64 / w as f64;
            0.5 + 0.3 * (2.0 * std::f64::consts::PI * (fy + 0.3 * fx)).sin()
                * (0.7 + 0.1 * c as f64)
        }))
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let normal = Normal::new(0.0, 0.04).unwrap();
        let noisy = ImageTensor::from_array_clamped(
            clean.data() + &Array3::from_shape_fn(clean.data().dim(), |_| normal.sample(&mut rng)),
        )
        .unwrap();
        let denoised = wavelet_denoise(&noisy, &ShrinkConfig::default()).unwrap();
        let mse = |a: &ImageTensor, b: &ImageTensor| {
            a.data()
                .iter()
                .zip(b.data().iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                / a.data().len() as f64
        };
        let psnr_noisy = -10.0 * mse(&clean, &noisy).log10();
        let psnr_denoised = -10.0 * mse(&clean, &denoised).log10();
        assert!(
            psnr_denoised > psnr_noisy,
            "denoised {psnr_denoised:.2} dB vs noisy {psnr_noisy:.2} dB"
        );
    }

    #[test]
    fn retained_detail_energy_is_monotone_in_sigma() {
        let img = random_rgb(32, 32, 11);
        let plane = imaging_core::rgb_to_ycbcr(&img).unwrap().y;
        let pyr = dwt2(&plane, WaveletFamily::Db4, 2).unwrap();
        let mut last = f64::INFINITY;
        for sigma in [0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5] {
            let mut shrunk = pyr.clone();
            let mut retained = 0.0;
            for level in &mut shrunk.details {
                for band in level.bands_mut() {
                    let t = bayes_threshold(band, sigma).unwrap();
                    soft_threshold(band, t).unwrap();
                    retained += band.iter().map(|v| v * v).sum::<f64>();
                }
            }
            assert!(
                retained <= last + 1e-12,
                "sigma {sigma}: {retained} > {last}"
            );
            last = retained;
        }
    }

    #[test]
    fn approx_band_is_bit_identical_after_denoise_shrink() {
        let img = random_rgb(32, 32, 13);
        let plane = imaging_core::rgb_to_ycbcr(&img).unwrap().y;
        let pyr = dwt2(&plane, WaveletFamily::Db4, 2).unwrap();
        let mut shrunk = pyr.clone();
        for level in &mut shrunk.details {
            for band in level.bands_mut() {
                let t = bayes_threshold(band, 0.04).unwrap();
                soft_threshold(band, t).unwrap();
            }
        }
        assert_eq!(pyr.approx, shrunk.approx);
    }

    #[test]
    fn small_images_use_clamped_depth_instead_of_failing() {
        let img = random_rgb(8, 8, 17);
        let out = wavelet_denoise(&img, &ShrinkConfig::default()).unwrap();
        assert_eq!((out.height(), out.width()), (8, 8));
    }

    #[test]
    fn grayscale_images_are_denoised_directly() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let img = ImageTensor::from_array(Array3::from_shape_fn((16, 16, 1), |_| {
            rng.random::<f64>()
        }))
        .unwrap();
        let out = wavelet_denoise(&img, &ShrinkConfig::default()).unwrap();
        assert_eq!(out.channels(), 1);
    }

    // Soft thresholding is non-expansive: |D(a,t) - D(b,t)| <= |a - b|.
    #[test]
    fn soft_threshold_non_expansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..2000 {
            let a: f64 = (rng.random::<f64>() - 0.5) * 4.0;
            let b: f64 = (rng.random::<f64>() - 0.5) * 4.0;
            let t: f64 = rng.random::<f64>();
            let d = |x: f64| x.signum() * (x.abs() - t).max(0.0);
            assert!((d(a) - d(b)).abs() <= (a - b).abs() + 1e-15);
        }
    }
}
