//! Orthonormal type-II 2-D discrete cosine transform, used for the
//! frequency-spectrum analyses.

use ndarray::Array2;

/// Orthonormal DCT-II basis matrix for length `n`.
fn dct_matrix(n: usize) -> Array2<f64> {
    let mut c = Array2::zeros((n, n));
    let norm0 = (1.0 / n as f64).sqrt();
    let norm = (2.0 / n as f64).sqrt();
    for k in 0..n {
        for i in 0..n {
            let angle = std::f64::consts::PI * (2.0 * i as f64 + 1.0) * k as f64
                / (2.0 * n as f64);
            c[[k, i]] = if k == 0 { norm0 } else { norm * angle.cos() };
        }
    }
    c
}

/// Forward orthonormal 2-D DCT of a single plane.
pub fn dct2(plane: &Array2<f64>) -> Array2<f64> {
    let (h, w) = plane.dim();
    let ch = dct_matrix(h);
    let cw = dct_matrix(w);
    ch.dot(plane).dot(&cw.t())
}

/// Inverse of [`dct2`]; `idct2(dct2(x)) == x` to machine precision.
pub fn idct2(coeffs: &Array2<f64>) -> Array2<f64> {
    let (h, w) = coeffs.dim();
    let ch = dct_matrix(h);
    let cw = dct_matrix(w);
    ch.t().dot(coeffs).dot(&cw)
}
