//! From-scratch binary classifiers behind a single fit/score contract.
//!
//! Every model standardizes its inputs with statistics from the training
//! rows. Scores are thresholded at 0.5, except the SVM margin which is
//! thresholded at 0.

mod knn;
mod linear;
mod logistic;
mod mlp;
pub mod optim;
mod svm;
mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub use knn::knn_neighbours;
pub use logistic::logistic_objective;
pub use mlp::{mlp_objective, MlpShape};
pub use tree::Node;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "LIN")]
    Lin,
    #[serde(rename = "LOG")]
    Log,
    #[serde(rename = "SVM")]
    Svm,
    #[serde(rename = "KNN")]
    Knn,
    #[serde(rename = "NN")]
    Nn,
    #[serde(rename = "DT")]
    Dt,
}

impl Algorithm {
    /// Fixed order, also used to break ranking ties.
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Lin,
        Algorithm::Log,
        Algorithm::Svm,
        Algorithm::Knn,
        Algorithm::Nn,
        Algorithm::Dt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Lin => "LIN",
            Algorithm::Log => "LOG",
            Algorithm::Svm => "SVM",
            Algorithm::Knn => "KNN",
            Algorithm::Nn => "NN",
            Algorithm::Dt => "DT",
        }
    }

    /// Accepted hyperparameters and their defaults.
    pub fn defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            Algorithm::Lin => &[("ridge", 1e-8)],
            Algorithm::Log => &[("lambda", 1.0), ("max_iter", 1000.0), ("tol", 1e-6)],
            Algorithm::Svm => &[("lambda", 1.0), ("epochs", 400.0), ("step", 1.0)],
            Algorithm::Knn => &[("k", 5.0)],
            Algorithm::Nn => &[("hidden", 16.0), ("alpha", 1e-4), ("max_iter", 500.0)],
            Algorithm::Dt => &[("max_depth", 10.0), ("min_leaf", 2.0)],
        }
    }

    fn decision_threshold(self) -> f64 {
        match self {
            Algorithm::Svm => 0.0,
            _ => 0.5,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

/// Algorithm, hyperparameter overrides and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub algorithm: Algorithm,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(algorithm: Algorithm) -> Self {
        ModelSpec {
            algorithm,
            params: BTreeMap::new(),
            seed: 0,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with(mut self, key: &str, value: f64) -> Result<Self> {
        if !self.algorithm.defaults().iter().any(|(k, _)| *k == key) {
            return Err(Error::Config(format!(
                "{} has no hyperparameter `{key}`",
                self.algorithm
            )));
        }
        if !value.is_finite() {
            return Err(Error::Config(format!("{key} must be finite")));
        }
        self.params.insert(key.to_string(), value);
        Ok(self)
    }

    /// Parses `key=value`.
    pub fn with_assignment(self, kv: &str) -> Result<Self> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{kv}`")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad value in `{kv}`")))?;
        self.with(k.trim(), v)
    }

    pub fn param(&self, key: &str) -> f64 {
        self.params.get(key).copied().unwrap_or_else(|| {
            self.algorithm
                .defaults()
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .expect("hyperparameter declared in defaults")
        })
    }

    fn positive_int(&self, key: &str) -> Result<usize> {
        let v = self.param(key);
        if v < 1.0 || v.fract() != 0.0 {
            return Err(Error::Config(format!("{key} must be a positive integer, got {v}")));
        }
        Ok(v as usize)
    }

    fn non_negative(&self, key: &str) -> Result<f64> {
        let v = self.param(key);
        if v < 0.0 {
            return Err(Error::Config(format!("{key} must be non-negative, got {v}")));
        }
        Ok(v)
    }
}

/// Feature matrix with binary labels (1 = positive class).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<u8>,
    pub columns: Vec<String>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<u8>, columns: Vec<String>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::Shape {
                expected: x.rows(),
                got: y.len(),
            });
        }
        if x.cols() != columns.len() {
            return Err(Error::Shape {
                expected: x.cols(),
                got: columns.len(),
            });
        }
        if y.iter().any(|&v| v > 1) {
            return Err(Error::Config("labels must be 0 or 1".into()));
        }
        Ok(Dataset { x, y, columns })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&r| self.y[r]).collect(),
            columns: self.columns.clone(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_columns(cols),
            y: self.y.clone(),
            columns: cols.iter().map(|&c| self.columns[c].clone()).collect(),
        }
    }

    pub fn positives(&self) -> usize {
        self.y.iter().filter(|&&v| v == 1).count()
    }
}

/// Per-column z-scoring; zero-variance columns map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let n = x.rows() as f64;
        let mut mean = vec![0.0; x.cols()];
        for row in x.iter_rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; x.cols()];
        for row in x.iter_rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
        Standardizer { mean, std }
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                let s = self.std[c];
                *v = if s > 1e-12 { (*v - self.mean[c]) / s } else { 0.0 };
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Linear { weights: Vec<f64>, bias: f64 },
    Knn { k: usize, x: Matrix, y: Vec<u8> },
    Tree { nodes: Vec<Node> },
    Mlp { shape: MlpShape, theta: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: u32,
    pub spec: ModelSpec,
    pub columns: Vec<String>,
    pub scaler: Standardizer,
    pub params: ModelParams,
}

/// Trains a model. Both classes must be present.
pub fn fit(spec: &ModelSpec, data: &Dataset) -> Result<TrainedModel> {
    if data.is_empty() {
        return Err(Error::EmptyInput("training rows"));
    }
    let pos = data.positives();
    if pos == 0 || pos == data.len() {
        return Err(Error::DegenerateFit(format!(
            "{} needs both classes, got only class {}",
            spec.algorithm,
            u8::from(pos > 0)
        )));
    }
    let scaler = Standardizer::fit(&data.x);
    let x = scaler.transform(&data.x);
    let y = &data.y;
    let params = match spec.algorithm {
        Algorithm::Lin => linear::fit(&x, y, spec.non_negative("ridge")?)?,
        Algorithm::Log => logistic::fit(
            &x,
            y,
            spec.non_negative("lambda")?,
            spec.positive_int("max_iter")?,
            spec.non_negative("tol")?,
        ),
        Algorithm::Svm => svm::fit(
            &x,
            y,
            spec.non_negative("lambda")?,
            spec.positive_int("epochs")?,
            spec.non_negative("step")?,
        ),
        Algorithm::Knn => ModelParams::Knn {
            k: spec.positive_int("k")?,
            x,
            y: y.clone(),
        },
        Algorithm::Nn => mlp::fit(
            &x,
            y,
            spec.positive_int("hidden")?,
            spec.non_negative("alpha")?,
            spec.positive_int("max_iter")?,
            spec.seed,
        ),
        Algorithm::Dt => tree::fit(
            &x,
            y,
            spec.positive_int("max_depth")?,
            spec.positive_int("min_leaf")?,
        ),
    };
    Ok(TrainedModel {
        version: MODEL_FORMAT_VERSION,
        spec: spec.clone(),
        columns: data.columns.clone(),
        scaler,
        params,
    })
}

impl TrainedModel {
    /// Continuous score per row: a probability-like value for LOG, NN, KNN
    /// and DT, the regression output for LIN and the margin for SVM.
    pub fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.scaler.mean.len() {
            return Err(Error::Shape {
                expected: self.scaler.mean.len(),
                got: x.cols(),
            });
        }
        let z = self.scaler.transform(x);
        Ok(match &self.params {
            ModelParams::Linear { weights, bias } => {
                let raw = z.iter_rows().map(|r| crate::linalg::dot(weights, r) + bias);
                if self.spec.algorithm == Algorithm::Log {
                    raw.map(logistic::sigmoid).collect()
                } else {
                    raw.collect()
                }
            }
            ModelParams::Knn { k, x: train, y } => knn::score(train, y, *k, &z),
            ModelParams::Tree { nodes } => z.iter_rows().map(|r| tree::score(nodes, r)).collect(),
            ModelParams::Mlp { shape, theta } => {
                z.iter_rows().map(|r| mlp::forward(shape, theta, r)).collect()
            }
        })
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<u8>> {
        let t = self.spec.algorithm.decision_threshold();
        Ok(self
            .score(x)?
            .into_iter()
            .map(|s| u8::from(s >= t))
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: TrainedModel = serde_json::from_str(s)?;
        if m.version != MODEL_FORMAT_VERSION {
            return Err(Error::Serde(format!(
                "model format version {} not supported (expected {MODEL_FORMAT_VERSION})",
                m.version
            )));
        }
        Ok(m)
    }
}

#[cfg(test)]
pub(crate) mod testdata {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Two Gaussian-ish blobs separated along every axis by `gap`.
    pub fn blobs(n: usize, d: usize, gap: f64, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let label = (i % 2) as u8;
            let shift = if label == 1 { gap / 2.0 } else { -gap / 2.0 };
            rows.push((0..d).map(|_| shift + rng.gen_range(-1.0..1.0)).collect());
            y.push(label);
        }
        let columns = (0..d).map(|c| format!("f{c}")).collect();
        Dataset::new(Matrix::from_rows(&rows), y, columns).unwrap()
    }
}
