//! Softmax cross-entropy with a numerically stable log-sum-exp.

use ndarray::Array4;

use crate::{Batch, Scalar};

/// Row-wise softmax of (N, K, 1, 1) logits.
pub fn softmax<F: Scalar>(logits: &Batch<F>) -> Batch<F> {
    let (n, k, _, _) = logits.dim();
    let mut out = Array4::<F>::zeros((n, k, 1, 1));
    for s in 0..n {
        let mut maxv = f64::NEG_INFINITY;
        for c in 0..k {
            maxv = maxv.max(logits[[s, c, 0, 0]].to_f64_val());
        }
        let mut denom = 0.0f64;
        for c in 0..k {
            denom += (logits[[s, c, 0, 0]].to_f64_val() - maxv).exp();
        }
        for c in 0..k {
            let p = (logits[[s, c, 0, 0]].to_f64_val() - maxv).exp() / denom;
            out[[s, c, 0, 0]] = F::from_f64(p);
        }
    }
    out
}

/// Sum of per-sample cross-entropy losses and its gradient wrt the logits
/// (softmax minus one-hot).
pub fn softmax_cross_entropy<F: Scalar>(
    logits: &Batch<F>,
    labels: &[usize],
) -> (f64, Batch<F>) {
    let (n, k, _, _) = logits.dim();
    assert_eq!(n, labels.len(), "label count mismatch");
    let mut grad = Array4::<F>::zeros((n, k, 1, 1));
    let mut loss_sum = 0.0f64;
    for s in 0..n {
        let mut maxv = f64::NEG_INFINITY;
        for c in 0..k {
            maxv = maxv.max(logits[[s, c, 0, 0]].to_f64_val());
        }
        let mut denom = 0.0f64;
        for c in 0..k {
            denom += (logits[[s, c, 0, 0]].to_f64_val() - maxv).exp();
        }
        let log_denom = denom.ln() + maxv;
        loss_sum += log_denom - logits[[s, labels[s], 0, 0]].to_f64_val();
        for c in 0..k {
            let p = (logits[[s, c, 0, 0]].to_f64_val() - maxv).exp() / denom;
            let target = if c == labels[s] { 1.0 } else { 0.0 };
            grad[[s, c, 0, 0]] = F::from_f64(p - target);
        }
    }
    (loss_sum, grad)
}

/// Argmax with lowest-index tie-break.
pub fn argmax_class<F: Scalar>(logits_row: &[F]) -> usize {
    let mut best = 0;
    for (i, v) in logits_row.iter().enumerate().skip(1) {
        if *v > logits_row[best] {
            best = i;
        }
    }
    best
}

/// Fraction of rows whose argmax equals the label.
pub fn accuracy<F: Scalar>(logits: &Batch<F>, labels: &[usize]) -> f64 {
    let (n, k, _, _) = logits.dim();
    let mut correct = 0usize;
    for s in 0..n {
        let row: Vec<F> = (0..k).map(|c| logits[[s, c, 0, 0]]).collect();
        if argmax_class(&row) == labels[s] {
            correct += 1;
        }
    }
    correct as f64 / n.max(1) as f64
}
