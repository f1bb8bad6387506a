//! One-hidden-layer tanh network with a sigmoid output, trained by L-BFGS.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::logistic::{sigmoid, softplus};
use super::optim::{lbfgs, LbfgsOptions};
use super::ModelParams;
use crate::linalg::Matrix;

/// Parameter layout: W1 (hidden x inputs, row-major), b1, w2, b2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpShape {
    pub inputs: usize,
    pub hidden: usize,
}

impl MlpShape {
    pub fn len(&self) -> usize {
        self.hidden * self.inputs + 2 * self.hidden + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn split<'a>(&self, theta: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64], f64) {
        let (h, d) = (self.hidden, self.inputs);
        let (w1, rest) = theta.split_at(h * d);
        let (b1, rest) = rest.split_at(h);
        let (w2, rest) = rest.split_at(h);
        (w1, b1, w2, rest[0])
    }
}

fn hidden_layer(shape: &MlpShape, w1: &[f64], b1: &[f64], row: &[f64], out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate() {
        let w = &w1[j * shape.inputs..(j + 1) * shape.inputs];
        *o = (crate::linalg::dot(w, row) + b1[j]).tanh();
    }
}

pub(super) fn forward(shape: &MlpShape, theta: &[f64], row: &[f64]) -> f64 {
    let (w1, b1, w2, b2) = shape.split(theta);
    let mut h = vec![0.0; shape.hidden];
    hidden_layer(shape, w1, b1, row, &mut h);
    sigmoid(crate::linalg::dot(w2, &h) + b2)
}

/// Mean log-loss plus `alpha / (2n)` times the squared weights (biases
/// excluded), and its gradient.
pub fn mlp_objective(
    shape: &MlpShape,
    x: &Matrix,
    y: &[u8],
    theta: &[f64],
    alpha: f64,
) -> (f64, Vec<f64>) {
    let (h, d) = (shape.hidden, shape.inputs);
    let n = x.rows() as f64;
    let (w1, b1, w2, b2) = shape.split(theta);
    let mut grad = vec![0.0; theta.len()];
    let mut loss = 0.0;
    let mut act = vec![0.0; h];
    for (row, &t) in x.iter_rows().zip(y) {
        hidden_layer(shape, w1, b1, row, &mut act);
        let z = crate::linalg::dot(w2, &act) + b2;
        loss += softplus(z) - t as f64 * z;
        let delta = sigmoid(z) - t as f64;
        let (gw1, rest) = grad.split_at_mut(h * d);
        let (gb1, rest) = rest.split_at_mut(h);
        let (gw2, gb2) = rest.split_at_mut(h);
        gb2[0] += delta;
        for j in 0..h {
            gw2[j] += delta * act[j];
            let dh = delta * w2[j] * (1.0 - act[j] * act[j]);
            gb1[j] += dh;
            for (g, v) in gw1[j * d..(j + 1) * d].iter_mut().zip(row) {
                *g += dh * v;
            }
        }
    }
    let sq: f64 = w1.iter().chain(w2).map(|w| w * w).sum();
    loss = loss / n + alpha / (2.0 * n) * sq;
    grad.iter_mut().for_each(|g| *g /= n);
    for (i, g) in grad.iter_mut().enumerate() {
        let is_weight = i < h * d || (h * d + h..h * d + 2 * h).contains(&i);
        if is_weight {
            *g += alpha / n * theta[i];
        }
    }
    (loss, grad)
}

pub(super) fn fit(
    x: &Matrix,
    y: &[u8],
    hidden: usize,
    alpha: f64,
    max_iter: usize,
    seed: u64,
) -> ModelParams {
    let shape = MlpShape {
        inputs: x.cols(),
        hidden,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l1 = (6.0 / (shape.inputs + hidden) as f64).sqrt();
    let l2 = (6.0 / (hidden + 1) as f64).sqrt();
    let mut theta = vec![0.0; shape.len()];
    let (h, d) = (hidden, shape.inputs);
    for w in &mut theta[..h * d] {
        *w = rng.gen_range(-l1..l1);
    }
    for w in &mut theta[h * d + h..h * d + 2 * h] {
        *w = rng.gen_range(-l2..l2);
    }
    let opts = LbfgsOptions {
        max_iter,
        ..Default::default()
    };
    let theta = lbfgs(|t| mlp_objective(&shape, x, y, t, alpha), theta, &opts);
    ModelParams::Mlp { shape, theta }
}
