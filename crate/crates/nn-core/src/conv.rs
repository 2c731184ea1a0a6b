//! im2col-based 2-D convolution kernels and their adjoints.

use ndarray::{Array2, Array4, ShapeBuilder};

use crate::{Batch, Scalar};

pub(crate) fn conv_out_dim(input: usize, kernel: usize, stride: usize, pad: usize) -> usize {
    (input + 2 * pad - kernel) / stride + 1
}

/// Lower a batch into column form: (Cin*k*k, N*Ho*Wo).
///
/// Column ordering is sample-major so the gemm output reshapes directly
/// into (N, Cout, Ho, Wo).
pub(crate) fn im2col<F: Scalar>(
    x: &Batch<F>,
    kernel: usize,
    stride: usize,
    pad: usize,
) -> Array2<F> {
    let (n, c, h, w) = x.dim();
    let ho = conv_out_dim(h, kernel, stride, pad);
    let wo = conv_out_dim(w, kernel, stride, pad);
    let mut col = Array2::<F>::zeros((c * kernel * kernel, n * ho * wo).f());
    for s in 0..n {
        for oy in 0..ho {
            for ox in 0..wo {
                let col_idx = s * ho * wo + oy * wo + ox;
                let mut row = 0;
                for ch in 0..c {
                    for ky in 0..kernel {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        for kx in 0..kernel {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                col[[row, col_idx]] = x[[s, ch, iy as usize, ix as usize]];
                            }
                            row += 1;
                        }
                    }
                }
            }
        }
    }
    col
}

/// Adjoint of [`im2col`]: scatter column gradients back onto the input.
#[allow(clippy::too_many_arguments)]
pub(crate) fn col2im<F: Scalar>(
    dcol: &Array2<F>,
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
) -> Batch<F> {
    let ho = conv_out_dim(h, kernel, stride, pad);
    let wo = conv_out_dim(w, kernel, stride, pad);
    let mut dx = Array4::<F>::zeros((n, c, h, w));
    for s in 0..n {
        for oy in 0..ho {
            for ox in 0..wo {
                let col_idx = s * ho * wo + oy * wo + ox;
                let mut row = 0;
                for ch in 0..c {
                    for ky in 0..kernel {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        for kx in 0..kernel {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                dx[[s, ch, iy as usize, ix as usize]] += dcol[[row, col_idx]];
                            }
                            row += 1;
                        }
                    }
                }
            }
        }
    }
    dx
}

/// Forward convolution. `wmat` is the (Cout, Cin*k*k) weight matrix.
pub(crate) fn conv2d_forward<F: Scalar>(
    x: &Batch<F>,
    wmat: &Array2<F>,
    bias: &[F],
    kernel: usize,
    stride: usize,
    pad: usize,
) -> Batch<F> {
    let (n, _c, h, w) = x.dim();
    let cout = wmat.dim().0;
    let ho = conv_out_dim(h, kernel, stride, pad);
    let wo = conv_out_dim(w, kernel, stride, pad);
    let col = im2col(x, kernel, stride, pad);
    let out_mat = wmat.dot(&col); // (Cout, N*Ho*Wo)
    let mut out = Array4::<F>::zeros((n, cout, ho, wo));
    for co in 0..cout {
        let b = bias[co];
        for s in 0..n {
            for oy in 0..ho {
                for ox in 0..wo {
                    out[[s, co, oy, ox]] = out_mat[[co, s * ho * wo + oy * wo + ox]] + b;
                }
            }
        }
    }
    out
}

pub(crate) struct ConvGrads<F> {
    pub dweight: Array2<F>,
    pub dbias: Vec<F>,
}

/// Backward convolution. Recomputes the column form of the cached input.
/// Returns grad wrt input and, when requested, parameter gradients.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv2d_backward<F: Scalar>(
    grad_out: &Batch<F>,
    x: &Batch<F>,
    wmat: &Array2<F>,
    kernel: usize,
    stride: usize,
    pad: usize,
    want_param_grads: bool,
) -> (Batch<F>, Option<ConvGrads<F>>) {
    let (n, c, h, w) = x.dim();
    let (_, cout, ho, wo) = grad_out.dim();
    let mut gmat = Array2::<F>::zeros((cout, n * ho * wo));
    for s in 0..n {
        for co in 0..cout {
            for oy in 0..ho {
                for ox in 0..wo {
                    gmat[[co, s * ho * wo + oy * wo + ox]] = grad_out[[s, co, oy, ox]];
                }
            }
        }
    }

    let param_grads = if want_param_grads {
        let col = im2col(x, kernel, stride, pad);
        let dweight = gmat.dot(&col.t());
        let dbias = (0..cout)
            .map(|co| {
                let mut acc = F::zero();
                for idx in 0..n * ho * wo {
                    acc = acc + gmat[[co, idx]];
                }
                acc
            })
            .collect();
        Some(ConvGrads { dweight, dbias })
    } else {
        None
    };

    let dcol = wmat.t().dot(&gmat);
    let dx = col2im(&dcol, n, c, h, w, kernel, stride, pad);
    (dx, param_grads)
}
