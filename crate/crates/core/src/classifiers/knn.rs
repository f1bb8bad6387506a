//! K-nearest neighbours with Euclidean distance.

use crate::linalg::Matrix;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the `k` training rows nearest to `query`, closest first.
/// Equal distances go to the lower row index.
pub fn knn_neighbours(train: &Matrix, query: &[f64], k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = train
        .iter_rows()
        .enumerate()
        .map(|(i, r)| (sq_dist(r, query), i))
        .collect();
    let k = k.min(d.len());
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < d.len() {
        d.select_nth_unstable_by(k, cmp);
        d.truncate(k);
    }
    d.sort_unstable_by(cmp);
    d.into_iter().map(|(_, i)| i).collect()
}

/// Fraction of positive labels among the neighbours of each row.
pub(super) fn score(train: &Matrix, y: &[u8], k: usize, queries: &Matrix) -> Vec<f64> {
    queries
        .iter_rows()
        .map(|q| {
            let nn = knn_neighbours(train, q, k);
            nn.iter().map(|&i| y[i] as f64).sum::<f64>() / nn.len() as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_prefer_lower_index() {
        let train = Matrix::from_rows(&[vec![1.0], vec![-1.0], vec![1.0], vec![0.0]]);
        assert_eq!(knn_neighbours(&train, &[0.0], 3), vec![3, 0, 1]);
        assert_eq!(knn_neighbours(&train, &[0.0], 10).len(), 4);
    }
}
