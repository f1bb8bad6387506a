//! Linear soft-margin SVM trained by deterministic subgradient descent.

use super::ModelParams;
use crate::linalg::{dot, Matrix};

/// `lambda / (2n) * |w|^2 + mean hinge loss`, with labels mapped to ±1.
pub(super) fn objective(x: &Matrix, y: &[u8], w: &[f64], b: f64, lambda: f64) -> f64 {
    let n = x.rows() as f64;
    let hinge: f64 = x
        .iter_rows()
        .zip(y)
        .map(|(r, &t)| (1.0 - sign(t) * (dot(w, r) + b)).max(0.0))
        .sum();
    lambda / (2.0 * n) * dot(w, w) + hinge / n
}

fn sign(t: u8) -> f64 {
    if t == 1 {
        1.0
    } else {
        -1.0
    }
}

pub(super) fn fit(x: &Matrix, y: &[u8], lambda: f64, epochs: usize, step: f64) -> ModelParams {
    let (n, d) = (x.rows() as f64, x.cols());
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut best = (objective(x, y, &w, b, lambda), w.clone(), b);
    for t in 1..=epochs {
        let mut gw: Vec<f64> = w.iter().map(|wi| lambda / n * wi).collect();
        let mut gb = 0.0;
        for (r, &label) in x.iter_rows().zip(y) {
            let s = sign(label);
            if s * (dot(&w, r) + b) < 1.0 {
                for (g, v) in gw.iter_mut().zip(r) {
                    *g -= s * v / n;
                }
                gb -= s / n;
            }
        }
        let eta = step / (t as f64).sqrt();
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= eta * g;
        }
        b -= eta * gb;
        let f = objective(x, y, &w, b, lambda);
        if f < best.0 {
            best = (f, w.clone(), b);
        }
    }
    ModelParams::Linear {
        weights: best.1,
        bias: best.2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn objective_decreases_from_zero() {
        let d = super::super::testdata::blobs(60, 2, 2.0, 12);
        let z = super::super::Standardizer::fit(&d.x).transform(&d.x);
        let start = objective(&z, &d.y, &[0.0, 0.0], 0.0, 1.0);
        assert_eq!(start, 1.0);
        let ModelParams::Linear { weights, bias } = fit(&z, &d.y, 1.0, 200, 1.0) else {
            unreachable!()
        };
        assert!(objective(&z, &d.y, &weights, bias, 1.0) < 0.5);
    }
}
