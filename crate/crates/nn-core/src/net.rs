//! Batch driver: chunked, deterministic parallel forward/backward passes
//! and the training step.

use ndarray::{s, Array4, ArrayD, Axis};
use rayon::prelude::*;

use crate::arena::{merge_grads, GradStore};
use crate::graph::{BnStatsUpdate, Mode, Node, Tape};
use crate::loss::softmax_cross_entropy;
use crate::optim::Sgd;
use crate::{Batch, ParamArena, Scalar};

/// Fixed ghost-batch size. Chunking is independent of the worker count, so
/// reductions happen in a machine-independent order.
pub const GHOST_BATCH: usize = 32;

/// Momentum of the batch-norm running-statistics update.
const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy)]
pub struct TrainStepStats {
    pub loss_mean: f64,
    pub correct: usize,
    pub batch_size: usize,
}

/// A parameter arena plus the computation graph over it.
#[derive(Debug, Clone)]
pub struct Network<F> {
    pub arena: ParamArena<F>,
    pub root: Node<F>,
}

impl<F: Scalar> Network<F> {
    pub fn new(arena: ParamArena<F>, root: Node<F>) -> Self {
        Self { arena, root }
    }

    /// Forward a batch without caching. Chunks run in parallel and results
    /// are concatenated in order.
    pub fn forward(&self, x: &Batch<F>, mode: Mode) -> Batch<F> {
        assert!(
            mode == Mode::Eval,
            "plain forward is eval-only; training goes through train_step"
        );
        let outputs: Vec<Batch<F>> = chunk_views(x)
            .into_par_iter()
            .map(|chunk| {
                let mut bn = Vec::new();
                self.root
                    .forward(chunk.to_owned(), &self.arena, mode, None, &mut bn)
            })
            .collect();
        concat_batches(&outputs)
    }

    /// Forward only the first `prefix_len` top-level nodes (eval mode).
    /// Useful for reading intermediate feature maps.
    pub fn forward_prefix(&self, x: &Batch<F>, prefix_len: usize) -> Batch<F> {
        let Node::Seq(children) = &self.root else {
            panic!("forward_prefix requires a sequential root");
        };
        let sub = Node::Seq(children[..prefix_len].to_vec());
        let outputs: Vec<Batch<F>> = chunk_views(x)
            .into_par_iter()
            .map(|chunk| {
                let mut bn = Vec::new();
                sub.forward(chunk.to_owned(), &self.arena, Mode::Eval, None, &mut bn)
            })
            .collect();
        concat_batches(&outputs)
    }

    /// Vector-Jacobian product in eval mode: forward the batch, derive an
    /// upstream output-gradient via `upstream`, and backpropagate it to the
    /// input. Parameter gradients are skipped. Returns (outputs, dx).
    pub fn vjp<U>(&self, x: &Batch<F>, upstream: U) -> (Batch<F>, Batch<F>)
    where
        U: Fn(&Batch<F>) -> Batch<F> + Sync,
    {
        let results: Vec<(Batch<F>, Batch<F>)> = chunk_views(x)
            .into_par_iter()
            .map(|chunk| {
                let mut bn = Vec::new();
                let mut tape = Tape::new();
                let out = self.root.forward(
                    chunk.to_owned(),
                    &self.arena,
                    Mode::Eval,
                    Some(&mut tape),
                    &mut bn,
                );
                let g = upstream(&out);
                let mut grads: GradStore<F> = vec![None; self.arena.len()];
                let dx = self.root.backward(
                    g,
                    &self.arena,
                    Mode::Eval,
                    &mut tape,
                    &mut grads,
                    false,
                );
                (out, dx)
            })
            .collect();
        let outs: Vec<Batch<F>> = results.iter().map(|(o, _)| o.clone()).collect();
        let dxs: Vec<Batch<F>> = results.into_iter().map(|(_, d)| d).collect();
        (concat_batches(&outs), concat_batches(&dxs))
    }

    /// One optimizer step on a labelled batch: chunked parallel
    /// forward/backward, in-order gradient reduction, deferred batch-norm
    /// running-stat update, then SGD.
    pub fn train_step(
        &mut self,
        x: &Batch<F>,
        labels: &[usize],
        opt: &mut Sgd<F>,
    ) -> TrainStepStats {
        let n = x.dim().0;
        assert_eq!(n, labels.len());
        let chunks = chunk_views(x);
        let mut label_chunks: Vec<&[usize]> = Vec::with_capacity(chunks.len());
        let mut off = 0;
        for c in &chunks {
            let len = c.dim().0;
            label_chunks.push(&labels[off..off + len]);
            off += len;
        }

        type ChunkOut<F> = (GradStore<F>, Vec<BnStatsUpdate<F>>, f64, usize);
        let results: Vec<ChunkOut<F>> = chunks
            .into_par_iter()
            .zip(label_chunks.into_par_iter())
            .map(|(chunk, chunk_labels)| {
                let mut bn = Vec::new();
                let mut tape = Tape::new();
                let logits = self.root.forward(
                    chunk.to_owned(),
                    &self.arena,
                    Mode::Train,
                    Some(&mut tape),
                    &mut bn,
                );
                let (loss_sum, dlogits) = softmax_cross_entropy(&logits, chunk_labels);
                let correct = count_correct(&logits, chunk_labels);
                let mut grads: GradStore<F> = vec![None; self.arena.len()];
                self.root.backward(
                    dlogits,
                    &self.arena,
                    Mode::Train,
                    &mut tape,
                    &mut grads,
                    true,
                );
                (grads, bn, loss_sum, correct)
            })
            .collect();

        let mut total_grads: GradStore<F> = vec![None; self.arena.len()];
        let mut loss_sum = 0.0;
        let mut correct = 0;
        let mut bn_all: Vec<Vec<BnStatsUpdate<F>>> = Vec::new();
        for (grads, bn, l, c) in results {
            merge_grads(&mut total_grads, grads);
            loss_sum += l;
            correct += c;
            bn_all.push(bn);
        }
        self.apply_bn_updates(bn_all);
        opt.step(&mut self.arena, &total_grads, n as f64);

        TrainStepStats {
            loss_mean: loss_sum / n as f64,
            correct,
            batch_size: n,
        }
    }

    /// Fold per-chunk batch statistics into the running statistics,
    /// weighting by chunk size, in chunk order.
    fn apply_bn_updates(&mut self, per_chunk: Vec<Vec<BnStatsUpdate<F>>>) {
        let Some(first) = per_chunk.first() else {
            return;
        };
        let layers = first.len();
        for layer in 0..layers {
            let run_mean_id = first[layer].run_mean;
            let run_var_id = first[layer].run_var;
            let c = first[layer].mean.len();
            let mut mean = vec![0.0f64; c];
            let mut var = vec![0.0f64; c];
            let mut total = 0.0f64;
            for chunk in &per_chunk {
                let upd = &chunk[layer];
                let w = upd.sample_count as f64;
                for i in 0..c {
                    mean[i] += upd.mean[i].to_f64_val() * w;
                    var[i] += upd.var[i].to_f64_val() * w;
                }
                total += w;
            }
            for i in 0..c {
                mean[i] /= total;
                var[i] /= total;
            }
            let rm = self.arena.get_mut(run_mean_id);
            update_running(rm, &mean);
            let rv = self.arena.get_mut(run_var_id);
            update_running(rv, &var);
        }
    }

    pub fn param_count(&self) -> usize {
        self.arena.trainable_scalar_count()
    }
}

fn update_running<F: Scalar>(running: &mut ArrayD<F>, batch: &[f64]) {
    for (r, &b) in running.iter_mut().zip(batch.iter()) {
        let cur = r.to_f64_val();
        *r = F::from_f64(cur * (1.0 - BN_MOMENTUM) + b * BN_MOMENTUM);
    }
}

fn count_correct<F: Scalar>(logits: &Batch<F>, labels: &[usize]) -> usize {
    let (n, k, _, _) = logits.dim();
    let mut correct = 0;
    for s in 0..n {
        let row: Vec<F> = (0..k).map(|c| logits[[s, c, 0, 0]]).collect();
        if crate::loss::argmax_class(&row) == labels[s] {
            correct += 1;
        }
    }
    correct
}

fn chunk_views<F: Scalar>(x: &Batch<F>) -> Vec<ndarray::ArrayView4<'_, F>> {
    x.axis_chunks_iter(Axis(0), GHOST_BATCH).collect()
}

fn concat_batches<F: Scalar>(parts: &[Batch<F>]) -> Batch<F> {
    assert!(!parts.is_empty());
    let (_, c, h, w) = parts[0].dim();
    let n: usize = parts.iter().map(|p| p.dim().0).sum();
    let mut out = Array4::<F>::zeros((n, c, h, w));
    let mut off = 0;
    for p in parts {
        let len = p.dim().0;
        out.slice_mut(s![off..off + len, .., .., ..]).assign(p);
        off += len;
    }
    out
}

/// He-normal initialization for weight tensors.
pub fn he_normal<F: Scalar>(
    rng: &mut impl rand::Rng,
    shape: &[usize],
    fan_in: usize,
) -> ArrayD<F> {
    use rand_distr::{Distribution, Normal};
    let std = (2.0 / fan_in as f64).sqrt();
    let normal = Normal::new(0.0, std).unwrap();
    let total: usize = shape.iter().product();
    let data: Vec<F> = (0..total)
        .map(|_| F::from_f64(normal.sample(rng)))
        .collect();
    ArrayD::from_shape_vec(shape.to_vec(), data).unwrap()
}
