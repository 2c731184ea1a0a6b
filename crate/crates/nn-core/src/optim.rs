//! SGD with momentum and selective weight decay.

use ndarray::ArrayD;

use crate::arena::GradStore;
use crate::{ParamArena, Scalar};

#[derive(Debug, Clone, Copy)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            lr: 0.05,
            momentum: 0.9,
            weight_decay: 5e-4,
        }
    }
}

#[derive(Debug)]
pub struct Sgd<F> {
    pub cfg: SgdConfig,
    velocity: Vec<Option<ArrayD<F>>>,
}

impl<F: Scalar> Sgd<F> {
    pub fn new(cfg: SgdConfig, param_count: usize) -> Self {
        Self {
            cfg,
            velocity: (0..param_count).map(|_| None).collect(),
        }
    }

    /// Apply one update. `grads` holds loss-sum gradients; `scale` is the
    /// batch size, so updates use mean gradients.
    pub fn step(&mut self, arena: &mut ParamArena<F>, grads: &GradStore<F>, scale: f64) {
        let lr = F::from_f64(self.cfg.lr);
        let mom = F::from_f64(self.cfg.momentum);
        let inv_scale = F::from_f64(1.0 / scale);
        for (idx, grad) in grads.iter().enumerate() {
            let Some(grad) = grad else { continue };
            let entry = &mut arena.entries[idx];
            if !entry.trainable {
                continue;
            }
            let wd = if entry.decay {
                F::from_f64(self.cfg.weight_decay)
            } else {
                F::zero()
            };
            let v = self.velocity[idx].get_or_insert_with(|| ArrayD::zeros(grad.shape()));
            for ((vi, gi), pi) in v.iter_mut().zip(grad.iter()).zip(entry.value.iter_mut()) {
                let g = *gi * inv_scale + wd * *pi;
                *vi = mom * *vi + g;
                *pi = *pi - lr * *vi;
            }
        }
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.cfg.lr = lr;
    }
}
