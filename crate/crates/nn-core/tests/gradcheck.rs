//! Finite-difference verification of every layer's adjoint, in f64.
//!
//! The check builds a small network touching all node types (conv with
//! stride, batch norm, relu, residual blocks with and without projection,
//! pixel shuffle, gap, dense), runs the analytic backward pass, and
//! compares both input and parameter gradients against central finite
//! differences of the scalar loss.

use ndarray::{Array4, ArrayD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nn_core::{
    he_normal, softmax_cross_entropy, BnSpec, ConvSpec, DenseSpec, Mode, Network, Node,
    ParamArena, Tape,
};

struct TestNetBuilder {
    arena: ParamArena<f64>,
    rng: ChaCha8Rng,
}

impl TestNetBuilder {
    fn new(seed: u64) -> Self {
        Self {
            arena: ParamArena::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn conv(&mut self, name: &str, cin: usize, cout: usize, k: usize, stride: usize) -> Node<f64> {
        let weight = self.arena.insert(
            format!("{name}.weight"),
            he_normal(&mut self.rng, &[cout, cin, k, k], cin * k * k),
            true,
            true,
        );
        let bias = self.arena.insert(
            format!("{name}.bias"),
            ArrayD::zeros(vec![cout]),
            true,
            false,
        );
        Node::Conv(ConvSpec {
            weight,
            bias,
            kernel: k,
            stride,
            pad: k / 2,
        })
    }

    fn bn(&mut self, name: &str, c: usize) -> Node<f64> {
        // Non-trivial gamma/beta and running stats so eval mode is exercised
        // with realistic values.
        let gamma_init: Vec<f64> = (0..c).map(|_| 0.8 + 0.4 * self.rng.random::<f64>()).collect();
        let beta_init: Vec<f64> = (0..c).map(|_| 0.2 * self.rng.random::<f64>()).collect();
        let rm: Vec<f64> = (0..c).map(|_| 0.1 * self.rng.random::<f64>()).collect();
        let rv: Vec<f64> = (0..c).map(|_| 0.5 + self.rng.random::<f64>()).collect();
        let gamma = self
            .arena
            .insert(format!("{name}.gamma"), ndarray::Array1::from_vec(gamma_init).into_dyn(), true, false);
        let beta = self
            .arena
            .insert(format!("{name}.beta"), ndarray::Array1::from_vec(beta_init).into_dyn(), true, false);
        let run_mean =
            self.arena
                .insert(format!("{name}.run_mean"), ndarray::Array1::from_vec(rm).into_dyn(), false, false);
        let run_var =
            self.arena
                .insert(format!("{name}.run_var"), ndarray::Array1::from_vec(rv).into_dyn(), false, false);
        Node::BatchNorm(BnSpec {
            gamma,
            beta,
            run_mean,
            run_var,
        })
    }

    fn dense(&mut self, name: &str, cin: usize, cout: usize) -> Node<f64> {
        let weight = self.arena.insert(
            format!("{name}.weight"),
            he_normal(&mut self.rng, &[cout, cin], cin),
            true,
            true,
        );
        let bias = self.arena.insert(
            format!("{name}.bias"),
            ArrayD::zeros(vec![cout]),
            true,
            false,
        );
        Node::Dense(DenseSpec { weight, bias })
    }
}

/// A network touching every node type.
fn build_full_net(seed: u64) -> Network<f64> {
    let mut b = TestNetBuilder::new(seed);
    let stem = b.conv("stem", 2, 4, 3, 1);
    let stem_bn = b.bn("stem_bn", 4);
    // Residual block with projection (stride 2).
    let blk_body = Node::Seq(vec![
        b.conv("blk.c1", 4, 4, 3, 2),
        b.bn("blk.b1", 4),
        Node::Relu,
        b.conv("blk.c2", 4, 6, 3, 1),
        b.bn("blk.b2", 6),
    ]);
    let blk_proj = Node::Seq(vec![b.conv("blk.proj", 4, 6, 1, 2), b.bn("blk.pbn", 6)]);
    let residual = Node::Residual {
        body: Box::new(blk_body),
        projection: Some(Box::new(blk_proj)),
        scale: 1.0,
    };
    // Identity residual with scaling (EDSR-style).
    let blk2 = Node::Residual {
        body: Box::new(Node::Seq(vec![
            b.conv("blk2.c1", 6, 6, 3, 1),
            Node::Relu,
            b.conv("blk2.c2", 6, 6, 3, 1),
        ])),
        projection: None,
        scale: 0.1,
    };
    // Pixel shuffle path: 6 -> 8 channels = 2 * r^2 with r = 2.
    let ps_conv = b.conv("ps", 6, 8, 3, 1);
    let head = b.dense("head", 2, 3);
    let root = Node::Seq(vec![
        stem,
        stem_bn,
        Node::Relu,
        residual,
        Node::Relu,
        blk2,
        ps_conv,
        Node::PixelShuffle(2),
        Node::Gap,
        head,
    ]);
    Network::new(b.arena, root)
}

fn loss_of(net: &Network<f64>, x: &Array4<f64>, labels: &[usize], mode: Mode) -> f64 {
    let mut bn = Vec::new();
    let logits = net.root.forward(x.clone(), &net.arena, mode, None, &mut bn);
    let (loss, _) = softmax_cross_entropy(&logits, labels);
    loss
}

fn analytic_grads(
    net: &Network<f64>,
    x: &Array4<f64>,
    labels: &[usize],
    mode: Mode,
) -> (Array4<f64>, Vec<Option<ArrayD<f64>>>) {
    let mut bn = Vec::new();
    let mut tape = Tape::new();
    let logits = net
        .root
        .forward(x.clone(), &net.arena, mode, Some(&mut tape), &mut bn);
    let (_, dlogits) = softmax_cross_entropy(&logits, labels);
    let mut grads = vec![None; net.arena.len()];
    let dx = net
        .root
        .backward(dlogits, &net.arena, mode, &mut tape, &mut grads, true);
    (dx, grads)
}

fn check_mode(mode: Mode, seed: u64) {
    let net = build_full_net(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    let x = Array4::from_shape_fn((3, 2, 8, 8), |_| rng.random::<f64>());
    let labels = vec![0usize, 2, 1];

    let (dx, grads) = analytic_grads(&net, &x, &labels, mode);

    // Input gradient vs central differences on a pixel sample.
    let h = 1e-5;
    let mut checked = 0;
    let mut idx_rng = ChaCha8Rng::seed_from_u64(seed + 200);
    while checked < 25 {
        let s = idx_rng.random_range(0..3);
        let c = idx_rng.random_range(0..2);
        let py = idx_rng.random_range(0..8);
        let px = idx_rng.random_range(0..8);
        let mut xp = x.clone();
        xp[[s, c, py, px]] += h;
        let mut xm = x.clone();
        xm[[s, c, py, px]] -= h;
        let fd = (loss_of(&net, &xp, &labels, mode) - loss_of(&net, &xm, &labels, mode)) / (2.0 * h);
        let an = dx[[s, c, py, px]];
        let denom = an.abs().max(fd.abs()).max(1e-8);
        assert!(
            (an - fd).abs() / denom < 1e-5,
            "{mode:?} input grad at ({s},{c},{py},{px}): analytic {an} vs fd {fd}"
        );
        checked += 1;
    }

    // Parameter gradients vs central differences on a few entries per param.
    for idx in 0..net.arena.len() {
        let id = nn_core::ParamId(idx);
        let Some(g) = &grads[idx] else { continue };
        let len = g.len();
        let samples: Vec<usize> = (0..len.min(4)).map(|i| i * len.max(1) / len.min(4).max(1)).collect();
        for &flat in &samples {
            let mut netp = net.clone();
            bump(&mut netp, id, flat, h);
            let mut netm = net.clone();
            bump(&mut netm, id, flat, -h);
            let fd = (loss_of(&netp, &x, &labels, mode) - loss_of(&netm, &x, &labels, mode))
                / (2.0 * h);
            let an = g.as_slice().unwrap()[flat];
            let denom = an.abs().max(fd.abs()).max(1e-7);
            assert!(
                (an - fd).abs() / denom < 1e-4,
                "{mode:?} param {} [{flat}]: analytic {an} vs fd {fd}",
                netp.arena.name(id)
            );
        }
    }
}

#[test]
fn gradients_match_finite_differences_in_eval_mode() {
    check_mode(Mode::Eval, 41);
}

#[test]
fn gradients_match_finite_differences_in_train_mode() {
    check_mode(Mode::Train, 43);
}

fn bump(net: &mut Network<f64>, id: nn_core::ParamId, flat: usize, delta: f64) {
    let arr = net.arena.get_mut(id);
    arr.as_slice_mut().unwrap()[flat] += delta;
}

#[test]
fn vjp_matches_manual_backward_and_batching_is_consistent() {
    let net = build_full_net(7);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    // More samples than one ghost batch to exercise chunk concatenation.
    let x = Array4::from_shape_fn((35, 2, 8, 8), |_| rng.random::<f64>());
    let labels: Vec<usize> = (0..35).map(|i| i % 3).collect();

    let (logits, dx) = net.vjp(&x, |out| {
        let lb: Vec<usize> = (0..out.dim().0).map(|i| labels[0] * 0 + (i % 3)).collect();
        softmax_cross_entropy(out, &lb).1
    });

    // Batched logits agree with per-sample logits.
    for s in [0usize, 1, 33, 34] {
        let single = x
            .slice(ndarray::s![s..s + 1, .., .., ..])
            .to_owned();
        let single_logits = net.forward(&single, Mode::Eval);
        for c in 0..3 {
            assert!(
                (single_logits[[0, c, 0, 0]] - logits[[s, c, 0, 0]]).abs() < 1e-9,
                "sample {s} class {c}"
            );
        }
        // Per-sample gradient equals the batched gradient rows.
        let (_, dx_single) = net.vjp(&single, |out| {
            softmax_cross_entropy(out, &[labels[s]]).1
        });
        let err = dx_single
            .iter()
            .zip(dx.slice(ndarray::s![s..s + 1, .., .., ..]).iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "sample {s}: {err}");
    }
}
