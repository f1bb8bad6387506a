//! Ordinary least squares on {0, 1} labels.

use super::ModelParams;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, Matrix};

/// Inputs are standardized, so the intercept is the label mean and the
/// weights solve the centred normal equations with a tiny ridge term.
pub(super) fn fit(x: &Matrix, y: &[u8], ridge: f64) -> Result<ModelParams> {
    let (n, d) = (x.rows(), x.cols());
    let ybar = y.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
    let mut gram = Matrix::zeros(d, d);
    let mut rhs = vec![0.0; d];
    for (row, &t) in x.iter_rows().zip(y) {
        let r = t as f64 - ybar;
        for i in 0..d {
            rhs[i] += row[i] * r;
            for j in i..d {
                gram.set(i, j, gram.get(i, j) + row[i] * row[j]);
            }
        }
    }
    let eps = ridge * n as f64;
    for i in 0..d {
        for j in 0..i {
            gram.set(i, j, gram.get(j, i));
        }
        gram.set(i, i, gram.get(i, i) + eps.max(f64::MIN_POSITIVE));
    }
    let weights = cholesky_solve(&gram, &rhs)
        .ok_or_else(|| Error::DegenerateFit("normal equations not positive definite".into()))?;
    Ok(ModelParams::Linear {
        weights,
        bias: ybar,
    })
}
