//! Layer graph with explicit forward caching and hand-derived adjoints.
//!
//! Forward pushes whatever a node needs onto a tape; backward pops in exact
//! reverse order. Sequential and residual composition keep the stack
//! discipline: children are visited in forward order and unwound in reverse.

use ndarray::{Array1, Array2, Array4};

use crate::arena::{add_grad, GradStore};
use crate::conv::{conv2d_backward, conv2d_forward, conv_out_dim};
use crate::{Batch, ParamArena, ParamId, Scalar};

/// Evaluation semantics of a pass: train uses per-chunk batch-norm
/// statistics, eval uses frozen running statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

pub(crate) enum TapeEntry<F> {
    Arr(Batch<F>),
    Stats { mean: Vec<F>, invstd: Vec<F> },
    Dims((usize, usize)),
}

/// Forward-pass cache consumed by the backward pass.
pub struct Tape<F> {
    entries: Vec<TapeEntry<F>>,
}

impl<F> Tape<F> {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    fn push(&mut self, e: TapeEntry<F>) {
        self.entries.push(e);
    }

    fn pop_arr(&mut self) -> Batch<F> {
        match self.entries.pop() {
            Some(TapeEntry::Arr(a)) => a,
            _ => panic!("tape corrupted: expected array entry"),
        }
    }

    fn pop_stats(&mut self) -> (Vec<F>, Vec<F>) {
        match self.entries.pop() {
            Some(TapeEntry::Stats { mean, invstd }) => (mean, invstd),
            _ => panic!("tape corrupted: expected stats entry"),
        }
    }

    fn pop_dims(&mut self) -> (usize, usize) {
        match self.entries.pop() {
            Some(TapeEntry::Dims(d)) => d,
            _ => panic!("tape corrupted: expected dims entry"),
        }
    }
}

impl<F> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

/// Deferred batch-norm running-statistics update produced by a training
/// forward pass; applied after all parallel chunks complete, in chunk order.
pub struct BnStatsUpdate<F> {
    pub run_mean: ParamId,
    pub run_var: ParamId,
    pub mean: Vec<F>,
    pub var: Vec<F>,
    pub sample_count: usize,
}

#[derive(Debug, Clone)]
pub struct ConvSpec {
    pub weight: ParamId,
    pub bias: ParamId,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

#[derive(Debug, Clone)]
pub struct BnSpec {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub run_mean: ParamId,
    pub run_var: ParamId,
}

#[derive(Debug, Clone)]
pub struct DenseSpec {
    pub weight: ParamId,
    pub bias: ParamId,
}

/// A differentiable computation node.
#[derive(Debug, Clone)]
pub enum Node<F> {
    Seq(Vec<Node<F>>),
    Conv(ConvSpec),
    BatchNorm(BnSpec),
    Relu,
    /// Global average pooling to (N, C, 1, 1).
    Gap,
    /// Affine map on (N, C, 1, 1) tensors.
    Dense(DenseSpec),
    /// (N, C*r^2, H, W) -> (N, C, H*r, W*r).
    PixelShuffle(usize),
    /// y = shortcut(x) + scale * body(x); an absent projection means an
    /// identity shortcut.
    Residual {
        body: Box<Node<F>>,
        projection: Option<Box<Node<F>>>,
        scale: F,
    },
}

const BN_EPS: f64 = 1e-5;

impl<F: Scalar> Node<F> {
    pub fn forward(
        &self,
        x: Batch<F>,
        arena: &ParamArena<F>,
        mode: Mode,
        mut tape: Option<&mut Tape<F>>,
        bn_updates: &mut Vec<BnStatsUpdate<F>>,
    ) -> Batch<F> {
        match self {
            Node::Seq(children) => {
                let mut cur = x;
                for child in children {
                    cur = child.forward(cur, arena, mode, tape.as_deref_mut(), bn_updates);
                }
                cur
            }
            Node::Conv(spec) => {
                let wmat = conv_weight_matrix(arena, spec);
                let bias = arena.get(spec.bias).as_slice().unwrap();
                let out = conv2d_forward(&x, &wmat, bias, spec.kernel, spec.stride, spec.pad);
                if let Some(t) = tape {
                    t.push(TapeEntry::Arr(x));
                }
                out
            }
            Node::BatchNorm(spec) => {
                let (n, c, h, w) = x.dim();
                let gamma = arena.get(spec.gamma).as_slice().unwrap();
                let beta = arena.get(spec.beta).as_slice().unwrap();
                let (mean, invstd) = match mode {
                    Mode::Train => {
                        let (mean, var) = channel_stats(&x);
                        let invstd: Vec<F> = var
                            .iter()
                            .map(|&v| F::from_f64(1.0 / (v + BN_EPS).sqrt()))
                            .collect();
                        bn_updates.push(BnStatsUpdate {
                            run_mean: spec.run_mean,
                            run_var: spec.run_var,
                            mean: mean.iter().map(|&m| F::from_f64(m)).collect(),
                            var: var.iter().map(|&v| F::from_f64(v)).collect(),
                            sample_count: n,
                        });
                        (
                            mean.iter().map(|&m| F::from_f64(m)).collect::<Vec<F>>(),
                            invstd,
                        )
                    }
                    Mode::Eval => {
                        let rm = arena.get(spec.run_mean).as_slice().unwrap();
                        let rv = arena.get(spec.run_var).as_slice().unwrap();
                        let invstd: Vec<F> = rv
                            .iter()
                            .map(|&v| F::from_f64(1.0 / (v.to_f64_val() + BN_EPS).sqrt()))
                            .collect();
                        (rm.to_vec(), invstd)
                    }
                };
                let mut x_hat = x;
                for s in 0..n {
                    for ch in 0..c {
                        let (m, is) = (mean[ch], invstd[ch]);
                        for y in 0..h {
                            for xx in 0..w {
                                x_hat[[s, ch, y, xx]] = (x_hat[[s, ch, y, xx]] - m) * is;
                            }
                        }
                    }
                }
                let mut out = x_hat.clone();
                for s in 0..n {
                    for ch in 0..c {
                        let (g, b) = (gamma[ch], beta[ch]);
                        for y in 0..h {
                            for xx in 0..w {
                                out[[s, ch, y, xx]] = g * out[[s, ch, y, xx]] + b;
                            }
                        }
                    }
                }
                if let Some(t) = tape {
                    t.push(TapeEntry::Arr(x_hat));
                    t.push(TapeEntry::Stats { mean, invstd });
                }
                out
            }
            Node::Relu => {
                let mut out = x;
                out.mapv_inplace(|v| if v > F::zero() { v } else { F::zero() });
                if let Some(t) = tape {
                    t.push(TapeEntry::Arr(out.clone()));
                }
                out
            }
            Node::Gap => {
                let (n, c, h, w) = x.dim();
                let denom = F::from_f64((h * w) as f64);
                let mut out = Array4::<F>::zeros((n, c, 1, 1));
                for s in 0..n {
                    for ch in 0..c {
                        let mut acc = F::zero();
                        for y in 0..h {
                            for xx in 0..w {
                                acc = acc + x[[s, ch, y, xx]];
                            }
                        }
                        out[[s, ch, 0, 0]] = acc / denom;
                    }
                }
                if let Some(t) = tape {
                    t.push(TapeEntry::Dims((h, w)));
                }
                out
            }
            Node::Dense(spec) => {
                let w = dense_weight_matrix(arena, spec);
                let bias = arena.get(spec.bias).as_slice().unwrap();
                let (n, cin, _, _) = x.dim();
                let cout = w.dim().0;
                let mut out = Array4::<F>::zeros((n, cout, 1, 1));
                for s in 0..n {
                    for o in 0..cout {
                        let mut acc = bias[o];
                        for i in 0..cin {
                            acc = acc + w[[o, i]] * x[[s, i, 0, 0]];
                        }
                        out[[s, o, 0, 0]] = acc;
                    }
                }
                if let Some(t) = tape {
                    t.push(TapeEntry::Arr(x));
                }
                out
            }
            Node::PixelShuffle(r) => {
                let r = *r;
                let (n, c_in, h, w) = x.dim();
                assert!(c_in % (r * r) == 0, "pixel shuffle channel mismatch");
                let c = c_in / (r * r);
                let mut out = Array4::<F>::zeros((n, c, h * r, w * r));
                for s in 0..n {
                    for ch in 0..c {
                        for y in 0..h {
                            for xx in 0..w {
                                for i in 0..r {
                                    for j in 0..r {
                                        out[[s, ch, y * r + i, xx * r + j]] =
                                            x[[s, ch * r * r + i * r + j, y, xx]];
                                    }
                                }
                            }
                        }
                    }
                }
                out
            }
            Node::Residual {
                body,
                projection,
                scale,
            } => {
                let shortcut = match projection {
                    Some(p) => p.forward(x.clone(), arena, mode, tape.as_deref_mut(), bn_updates),
                    None => x.clone(),
                };
                let branch = body.forward(x, arena, mode, tape, bn_updates);
                let mut out = branch;
                out.mapv_inplace(|v| v * *scale);
                out += &shortcut;
                out
            }
        }
    }

    /// Backpropagate `grad` through this node, popping the tape entries the
    /// forward pass pushed. Parameter gradients are accumulated into
    /// `grads` unless `want_param_grads` is false (input-gradient-only
    /// passes skip the weight-gradient gemms).
    pub fn backward(
        &self,
        grad: Batch<F>,
        arena: &ParamArena<F>,
        mode: Mode,
        tape: &mut Tape<F>,
        grads: &mut GradStore<F>,
        want_param_grads: bool,
    ) -> Batch<F> {
        match self {
            Node::Seq(children) => {
                let mut cur = grad;
                for child in children.iter().rev() {
                    cur = child.backward(cur, arena, mode, tape, grads, want_param_grads);
                }
                cur
            }
            Node::Conv(spec) => {
                let x = tape.pop_arr();
                let wmat = conv_weight_matrix(arena, spec);
                let (dx, param_grads) = conv2d_backward(
                    &grad,
                    &x,
                    &wmat,
                    spec.kernel,
                    spec.stride,
                    spec.pad,
                    want_param_grads,
                );
                if let Some(pg) = param_grads {
                    let wshape = arena.get(spec.weight).shape().to_vec();
                    add_grad(
                        grads,
                        spec.weight,
                        pg.dweight.into_shape_with_order(wshape).unwrap().into_dyn(),
                    );
                    add_grad(grads, spec.bias, Array1::from_vec(pg.dbias).into_dyn());
                }
                dx
            }
            Node::BatchNorm(spec) => {
                let (_, invstd) = tape.pop_stats();
                let x_hat = tape.pop_arr();
                let (n, c, h, w) = x_hat.dim();
                let gamma = arena.get(spec.gamma).as_slice().unwrap();
                let m = F::from_f64((n * h * w) as f64);

                let mut dgamma = vec![F::zero(); c];
                let mut dbeta = vec![F::zero(); c];
                for s in 0..n {
                    for ch in 0..c {
                        for y in 0..h {
                            for xx in 0..w {
                                let g = grad[[s, ch, y, xx]];
                                dgamma[ch] = dgamma[ch] + g * x_hat[[s, ch, y, xx]];
                                dbeta[ch] = dbeta[ch] + g;
                            }
                        }
                    }
                }

                let mut dx = Array4::<F>::zeros((n, c, h, w));
                match mode {
                    Mode::Train => {
                        for s in 0..n {
                            for ch in 0..c {
                                let k = gamma[ch] * invstd[ch];
                                for y in 0..h {
                                    for xx in 0..w {
                                        let g = grad[[s, ch, y, xx]];
                                        let corr = (x_hat[[s, ch, y, xx]] * dgamma[ch]
                                            + dbeta[ch])
                                            / m;
                                        dx[[s, ch, y, xx]] = k * (g - corr);
                                    }
                                }
                            }
                        }
                    }
                    Mode::Eval => {
                        for s in 0..n {
                            for ch in 0..c {
                                let k = gamma[ch] * invstd[ch];
                                for y in 0..h {
                                    for xx in 0..w {
                                        dx[[s, ch, y, xx]] = k * grad[[s, ch, y, xx]];
                                    }
                                }
                            }
                        }
                    }
                }
                if want_param_grads {
                    add_grad(grads, spec.gamma, Array1::from_vec(dgamma).into_dyn());
                    add_grad(grads, spec.beta, Array1::from_vec(dbeta).into_dyn());
                }
                dx
            }
            Node::Relu => {
                let y = tape.pop_arr();
                let mut dx = grad;
                for (d, &v) in dx.iter_mut().zip(y.iter()) {
                    if v <= F::zero() {
                        *d = F::zero();
                    }
                }
                dx
            }
            Node::Gap => {
                let (h, w) = tape.pop_dims();
                let (n, c, _, _) = grad.dim();
                let denom = F::from_f64((h * w) as f64);
                let mut dx = Array4::<F>::zeros((n, c, h, w));
                for s in 0..n {
                    for ch in 0..c {
                        let g = grad[[s, ch, 0, 0]] / denom;
                        for y in 0..h {
                            for xx in 0..w {
                                dx[[s, ch, y, xx]] = g;
                            }
                        }
                    }
                }
                dx
            }
            Node::Dense(spec) => {
                let x = tape.pop_arr();
                let w = dense_weight_matrix(arena, spec);
                let (n, cin, _, _) = x.dim();
                let cout = w.dim().0;
                if want_param_grads {
                    let mut dw = Array2::<F>::zeros((cout, cin));
                    let mut db = vec![F::zero(); cout];
                    for s in 0..n {
                        for o in 0..cout {
                            let g = grad[[s, o, 0, 0]];
                            db[o] = db[o] + g;
                            for i in 0..cin {
                                dw[[o, i]] = dw[[o, i]] + g * x[[s, i, 0, 0]];
                            }
                        }
                    }
                    add_grad(grads, spec.weight, dw.into_dyn());
                    add_grad(grads, spec.bias, Array1::from_vec(db).into_dyn());
                }
                let mut dx = Array4::<F>::zeros((n, cin, 1, 1));
                for s in 0..n {
                    for i in 0..cin {
                        let mut acc = F::zero();
                        for o in 0..cout {
                            acc = acc + grad[[s, o, 0, 0]] * w[[o, i]];
                        }
                        dx[[s, i, 0, 0]] = acc;
                    }
                }
                dx
            }
            Node::PixelShuffle(r) => {
                let r = *r;
                let (n, c, hr, wr) = grad.dim();
                let (h, w) = (hr / r, wr / r);
                let mut dx = Array4::<F>::zeros((n, c * r * r, h, w));
                for s in 0..n {
                    for ch in 0..c {
                        for y in 0..h {
                            for xx in 0..w {
                                for i in 0..r {
                                    for j in 0..r {
                                        dx[[s, ch * r * r + i * r + j, y, xx]] =
                                            grad[[s, ch, y * r + i, xx * r + j]];
                                    }
                                }
                            }
                        }
                    }
                }
                dx
            }
            Node::Residual {
                body,
                projection,
                scale,
            } => {
                let mut branch_grad = grad.clone();
                branch_grad.mapv_inplace(|v| v * *scale);
                let dx_body = body.backward(branch_grad, arena, mode, tape, grads, want_param_grads);
                let dx_short = match projection {
                    Some(p) => p.backward(grad, arena, mode, tape, grads, want_param_grads),
                    None => grad,
                };
                dx_body + &dx_short
            }
        }
    }

    /// Number of top-level children when this node is a sequence.
    pub fn seq_len(&self) -> usize {
        match self {
            Node::Seq(v) => v.len(),
            _ => 1,
        }
    }
}

fn conv_weight_matrix<F: Scalar>(arena: &ParamArena<F>, spec: &ConvSpec) -> Array2<F> {
    let w = arena.get(spec.weight);
    let shape = w.shape();
    let (cout, cin, k) = (shape[0], shape[1], shape[2]);
    w.to_shape((cout, cin * k * k)).unwrap().to_owned()
}

fn dense_weight_matrix<F: Scalar>(arena: &ParamArena<F>, spec: &DenseSpec) -> Array2<F> {
    let w = arena.get(spec.weight);
    let shape = w.shape();
    w.to_shape((shape[0], shape[1])).unwrap().to_owned()
}

/// Per-channel mean and biased variance accumulated in f64.
fn channel_stats<F: Scalar>(x: &Batch<F>) -> (Vec<f64>, Vec<f64>) {
    let (n, c, h, w) = x.dim();
    let m = (n * h * w) as f64;
    let mut mean = vec![0.0f64; c];
    let mut var = vec![0.0f64; c];
    for s in 0..n {
        for ch in 0..c {
            for y in 0..h {
                for xx in 0..w {
                    mean[ch] += x[[s, ch, y, xx]].to_f64_val();
                }
            }
        }
    }
    for v in mean.iter_mut() {
        *v /= m;
    }
    for s in 0..n {
        for ch in 0..c {
            for y in 0..h {
                for xx in 0..w {
                    let d = x[[s, ch, y, xx]].to_f64_val() - mean[ch];
                    var[ch] += d * d;
                }
            }
        }
    }
    for v in var.iter_mut() {
        *v /= m;
    }
    (mean, var)
}

/// Expected output spatial dims of a conv for given input dims.
pub fn conv_output_dims(h: usize, w: usize, kernel: usize, stride: usize, pad: usize) -> (usize, usize) {
    (
        conv_out_dim(h, kernel, stride, pad),
        conv_out_dim(w, kernel, stride, pad),
    )
}
