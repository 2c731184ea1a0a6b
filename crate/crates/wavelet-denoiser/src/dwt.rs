use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WaveletError {
    #[error("decomposition depth {depth} too large for a {h}x{w} plane (max {max})")]
    DepthTooLarge {
        depth: usize,
        h: usize,
        w: usize,
        max: usize,
    },

    #[error("depth must be at least 1")]
    ZeroDepth,

    #[error("threshold must be non-negative, got {0}")]
    NegativeThreshold(f64),

    #[error("noise sigma must be non-negative, got {0}")]
    NegativeSigma(f64),

    #[error("empty subband")]
    EmptySubband,

    #[error("imaging: {0}")]
    Imaging(#[from] imaging_core::ImagingError),
}

/// Supported orthogonal wavelet families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveletFamily {
    /// 2-tap Haar.
    Haar,
    /// 8-tap Daubechies with 4 vanishing moments.
    Db4,
}

impl WaveletFamily {
    /// Analysis low-pass (scaling) filter.
    fn lowpass(self) -> &'static [f64] {
        match self {
            WaveletFamily::Haar => &HAAR,
            WaveletFamily::Db4 => &DB4,
        }
    }

    pub fn filter_len(self) -> usize {
        self.lowpass().len()
    }

    pub fn name(self) -> &'static str {
        match self {
            WaveletFamily::Haar => "haar",
            WaveletFamily::Db4 => "db4",
        }
    }
}

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;
static HAAR: [f64; 2] = [SQRT_HALF, SQRT_HALF];

// Daubechies-4 scaling coefficients (orthonormal, sum = sqrt(2)).
static DB4: [f64; 8] = [
    0.230377813308855230,
    0.714846570552541500,
    0.630880767929590400,
    -0.027983769416983850,
    -0.187034811718881140,
    0.030841381835986965,
    0.032883011666982945,
    -0.010597401784997278,
];

/// Quadrature-mirror high-pass filter: g[m] = (-1)^m h[L-1-m].
fn highpass(h: &[f64]) -> Vec<f64> {
    let l = h.len();
    (0..l)
        .map(|m| {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            sign * h[l - 1 - m]
        })
        .collect()
}

/// Detail subbands of one decomposition level.
///
/// `lh` is low-pass along rows / high-pass along columns, `hl` the
/// transpose arrangement, `hh` high-pass along both.
#[derive(Debug, Clone)]
pub struct DetailBands {
    pub lh: Array2<f64>,
    pub hl: Array2<f64>,
    pub hh: Array2<f64>,
}

impl DetailBands {
    pub fn bands(&self) -> [&Array2<f64>; 3] {
        [&self.lh, &self.hl, &self.hh]
    }

    pub fn bands_mut(&mut self) -> [&mut Array2<f64>; 3] {
        [&mut self.lh, &mut self.hl, &mut self.hh]
    }
}

/// Multilevel 2-D decomposition of a single plane.
///
/// `details[0]` holds the finest level (level 1); `approx` is the level-L
/// LL subband.
#[derive(Debug, Clone)]
pub struct WaveletPyramid {
    pub approx: Array2<f64>,
    pub details: Vec<DetailBands>,
    pub family: WaveletFamily,
}

impl WaveletPyramid {
    pub fn depth(&self) -> usize {
        self.details.len()
    }

    /// Total energy (sum of squared coefficients) across all subbands.
    pub fn energy(&self) -> f64 {
        let mut e: f64 = self.approx.iter().map(|v| v * v).sum();
        for d in &self.details {
            for b in d.bands() {
                e += b.iter().map(|v| v * v).sum::<f64>();
            }
        }
        e
    }
}

/// One periodized analysis step along a vector; input length must be even
/// and at least the filter length.
fn analyze_step(x: &[f64], h: &[f64], g: &[f64], lo: &mut [f64], hi: &mut [f64]) {
    let n = x.len();
    let half = n / 2;
    for k in 0..half {
        let mut a = 0.0;
        let mut d = 0.0;
        for (m, (&hm, &gm)) in h.iter().zip(g.iter()).enumerate() {
            let idx = (2 * k + m) % n;
            a += hm * x[idx];
            d += gm * x[idx];
        }
        lo[k] = a;
        hi[k] = d;
    }
}

/// Transpose of [`analyze_step`]; exact inverse for orthogonal filters.
fn synthesize_step(lo: &[f64], hi: &[f64], h: &[f64], g: &[f64], x: &mut [f64]) {
    let n = x.len();
    x.fill(0.0);
    for k in 0..lo.len() {
        for (m, (&hm, &gm)) in h.iter().zip(g.iter()).enumerate() {
            let idx = (2 * k + m) % n;
            x[idx] += hm * lo[k] + gm * hi[k];
        }
    }
}

fn level_ok(n: usize, filter_len: usize) -> bool {
    n % 2 == 0 && n >= filter_len
}

/// Largest decomposition depth supported for an `h`x`w` plane.
pub fn max_decomposition_depth(h: usize, w: usize, family: WaveletFamily) -> usize {
    let fl = family.filter_len();
    let mut depth = 0;
    let (mut ch, mut cw) = (h, w);
    while level_ok(ch, fl) && level_ok(cw, fl) {
        depth += 1;
        ch /= 2;
        cw /= 2;
    }
    depth
}

/// Single-level 2-D analysis: rows first, then columns.
fn dwt2_level(
    plane: &Array2<f64>,
    h: &[f64],
    g: &[f64],
) -> (Array2<f64>, DetailBands) {
    let (rows, cols) = plane.dim();
    let (hc, wc) = (rows / 2, cols / 2);

    // Row pass: produce low/high column halves.
    let mut row_lo = Array2::zeros((rows, wc));
    let mut row_hi = Array2::zeros((rows, wc));
    let mut lo_buf = vec![0.0; wc];
    let mut hi_buf = vec![0.0; wc];
    let mut line = vec![0.0; cols];
    for r in 0..rows {
        for c in 0..cols {
            line[c] = plane[[r, c]];
        }
        analyze_step(&line, h, g, &mut lo_buf, &mut hi_buf);
        for c in 0..wc {
            row_lo[[r, c]] = lo_buf[c];
            row_hi[[r, c]] = hi_buf[c];
        }
    }

    // Column pass on each half.
    let mut ll = Array2::zeros((hc, wc));
    let mut lh = Array2::zeros((hc, wc));
    let mut hl = Array2::zeros((hc, wc));
    let mut hh = Array2::zeros((hc, wc));
    let mut col = vec![0.0; rows];
    let mut lo2 = vec![0.0; hc];
    let mut hi2 = vec![0.0; hc];
    for c in 0..wc {
        for r in 0..rows {
            col[r] = row_lo[[r, c]];
        }
        analyze_step(&col, h, g, &mut lo2, &mut hi2);
        for r in 0..hc {
            ll[[r, c]] = lo2[r];
            lh[[r, c]] = hi2[r];
        }
        for r in 0..rows {
            col[r] = row_hi[[r, c]];
        }
        analyze_step(&col, h, g, &mut lo2, &mut hi2);
        for r in 0..hc {
            hl[[r, c]] = lo2[r];
            hh[[r, c]] = hi2[r];
        }
    }

    (ll, DetailBands { lh, hl, hh })
}

fn idwt2_level(
    ll: &Array2<f64>,
    d: &DetailBands,
    h: &[f64],
    g: &[f64],
) -> Array2<f64> {
    let (hc, wc) = ll.dim();
    let (rows, cols) = (hc * 2, wc * 2);

    let mut row_lo = Array2::zeros((rows, wc));
    let mut row_hi = Array2::zeros((rows, wc));
    let mut lo2 = vec![0.0; hc];
    let mut hi2 = vec![0.0; hc];
    let mut col = vec![0.0; rows];
    for c in 0..wc {
        for r in 0..hc {
            lo2[r] = ll[[r, c]];
            hi2[r] = d.lh[[r, c]];
        }
        synthesize_step(&lo2, &hi2, h, g, &mut col);
        for r in 0..rows {
            row_lo[[r, c]] = col[r];
        }
        for r in 0..hc {
            lo2[r] = d.hl[[r, c]];
            hi2[r] = d.hh[[r, c]];
        }
        synthesize_step(&lo2, &hi2, h, g, &mut col);
        for r in 0..rows {
            row_hi[[r, c]] = col[r];
        }
    }

    let mut out = Array2::zeros((rows, cols));
    let mut lo_buf = vec![0.0; wc];
    let mut hi_buf = vec![0.0; wc];
    let mut line = vec![0.0; cols];
    for r in 0..rows {
        for c in 0..wc {
            lo_buf[c] = row_lo[[r, c]];
            hi_buf[c] = row_hi[[r, c]];
        }
        synthesize_step(&lo_buf, &hi_buf, h, g, &mut line);
        for c in 0..cols {
            out[[r, c]] = line[c];
        }
    }
    out
}

/// Multilevel 2-D DWT of a plane with periodic extension.
pub fn dwt2(
    plane: &Array2<f64>,
    family: WaveletFamily,
    depth: usize,
) -> Result<WaveletPyramid, WaveletError> {
    if depth == 0 {
        return Err(WaveletError::ZeroDepth);
    }
    let (rows, cols) = plane.dim();
    let max = max_decomposition_depth(rows, cols, family);
    if depth > max {
        return Err(WaveletError::DepthTooLarge {
            depth,
            h: rows,
            w: cols,
            max,
        });
    }
    let h = family.lowpass();
    let g = highpass(h);
    let mut approx = plane.clone();
    let mut details = Vec::with_capacity(depth);
    for _ in 0..depth {
        let (ll, bands) = dwt2_level(&approx, h, &g);
        details.push(bands);
        approx = ll;
    }
    Ok(WaveletPyramid {
        approx,
        details,
        family,
    })
}

/// Inverse multilevel 2-D DWT; exact reconstruction.
pub fn idwt2(pyramid: &WaveletPyramid) -> Array2<f64> {
    let h = pyramid.family.lowpass();
    let g = highpass(h);
    let mut plane = pyramid.approx.clone();
    for bands in pyramid.details.iter().rev() {
        plane = idwt2_level(&plane, bands, h, &g);
    }
    plane
}
