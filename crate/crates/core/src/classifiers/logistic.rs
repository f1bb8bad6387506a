//! L2-regularized logistic regression by full-batch gradient descent.

use super::ModelParams;
use crate::linalg::{dot, norm, Matrix};

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(z)) without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean log-loss plus `lambda / (2n) * |w|^2`, and its gradient.
/// `theta` holds the weights followed by the unpenalized intercept.
pub fn logistic_objective(x: &Matrix, y: &[u8], theta: &[f64], lambda: f64) -> (f64, Vec<f64>) {
    let (n, d) = (x.rows(), x.cols());
    let (w, b) = (&theta[..d], theta[d]);
    let mut loss = 0.0;
    let mut grad = vec![0.0; d + 1];
    for (row, &t) in x.iter_rows().zip(y) {
        let z = dot(w, row) + b;
        loss += softplus(z) - t as f64 * z;
        let r = sigmoid(z) - t as f64;
        for (g, v) in grad.iter_mut().zip(row) {
            *g += r * v;
        }
        grad[d] += r;
    }
    let nf = n as f64;
    loss = loss / nf + lambda / (2.0 * nf) * dot(w, w);
    for (g, wi) in grad.iter_mut().zip(w) {
        *g = *g / nf + lambda / nf * wi;
    }
    grad[d] /= nf;
    (loss, grad)
}

pub(super) fn fit(x: &Matrix, y: &[u8], lambda: f64, max_iter: usize, tol: f64) -> ModelParams {
    let d = x.cols();
    let mut theta = vec![0.0; d + 1];
    let (mut f, mut g) = logistic_objective(x, y, &theta, lambda);
    let mut step = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    for _ in 0..max_iter {
        if norm(&g) < tol {
            break;
        }
        // Barzilai-Borwein initial step, then Armijo backtracking.
        if let Some((pt, pg)) = &prev {
            let s: Vec<f64> = theta.iter().zip(pt).map(|(a, b)| a - b).collect();
            let yv: Vec<f64> = g.iter().zip(pg).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &yv);
            if sy > 0.0 {
                step = dot(&s, &s) / sy;
            }
        }
        let gg = dot(&g, &g);
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(&g).map(|(t, gi)| t - step * gi).collect();
            let (fc, gc) = logistic_objective(x, y, &cand, lambda);
            if fc <= f - 1e-4 * step * gg {
                accepted = Some((cand, fc, gc));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, fc, gc)) = accepted else { break };
        prev = Some((std::mem::replace(&mut theta, cand), std::mem::replace(&mut g, gc)));
        f = fc;
    }
    ModelParams::Linear {
        bias: theta[d],
        weights: theta[..d].to_vec(),
    }
}
