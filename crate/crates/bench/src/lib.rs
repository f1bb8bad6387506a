//! Input generators shared by the benchmarks.

use fakewatch_core::linalg::Matrix;
use fakewatch_core::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two Gaussian-ish blobs separated along every axis by `gap`.
pub fn blobs(n: usize, d: usize, gap: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Matrix::zeros(n, d);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as u8;
        for j in 0..d {
            let noise: f64 = (0..4).map(|_| rng.gen_range(-1.0..1.0)).sum::<f64>() / 2.0;
            x.set(i, j, noise + gap * f64::from(label));
        }
        y.push(label);
    }
    Dataset::new(x, y, (0..d).map(|j| format!("x{j}")).collect()).expect("consistent shape")
}

/// Random labels and scores with occasional ties.
pub fn scored_labels(n: usize, seed: u64) -> (Vec<u8>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = (0..n).map(|i| if i < 2 { i as u8 } else { rng.gen_range(0..2) }).collect();
    let scores = (0..n).map(|_| (rng.gen_range(0..1000) as f64) / 1000.0).collect();
    (labels, scores)
}

/// A smooth S-shaped curve sampled on `[0, 2)`.
pub fn sigmoid_curve(points: usize) -> (Vec<f64>, Vec<f64>) {
    let x: Vec<f64> = (0..points).map(|i| 2.0 * i as f64 / points as f64).collect();
    let y = x.iter().map(|&v| 1.0 / (1.0 + (-6.0 * (v - 1.0)).exp())).collect();
    (x, y)
}
