//! CART decision tree with Gini impurity.

use serde::{Deserialize, Serialize};

use super::ModelParams;
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        /// Share of positive training rows in the leaf.
        score: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// n times the weighted Gini impurity of a split, from class counts.
fn weighted_gini(pos_l: usize, n_l: usize, pos_r: usize, n_r: usize) -> f64 {
    let side = |p: usize, n: usize| {
        let (p, n) = (p as f64, n as f64);
        2.0 * p * (n - p) / n
    };
    side(pos_l, n_l) + side(pos_r, n_r)
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [u8],
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn best_split(&self, rows: &[usize]) -> Option<(usize, f64)> {
        let n = rows.len();
        let total_pos = rows.iter().filter(|&&r| self.y[r] == 1).count();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<(f64, u8)> = Vec::with_capacity(n);
        for f in 0..self.x.cols() {
            order.clear();
            order.extend(rows.iter().map(|&r| (self.x.get(r, f), self.y[r])));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut pos_l = 0;
            for i in 0..n - 1 {
                pos_l += order[i].1 as usize;
                let n_l = i + 1;
                if order[i].0 == order[i + 1].0 || n_l < self.min_leaf || n - n_l < self.min_leaf {
                    continue;
                }
                let g = weighted_gini(pos_l, n_l, total_pos - pos_l, n - n_l);
                let thr = 0.5 * (order[i].0 + order[i + 1].0);
                if best.map_or(true, |(bg, _, _)| g < bg) {
                    best = Some((g, f, thr));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let pos = rows.iter().filter(|&&r| self.y[r] == 1).count();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            score: pos as f64 / rows.len() as f64,
        });
        let pure = pos == 0 || pos == rows.len();
        if pure || depth >= self.max_depth || rows.len() < 2 * self.min_leaf {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&rows) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&i| self.x.get(i, feature) <= threshold);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

/// Splits any impure node that has a valid split, even at zero gain, so
/// that interaction patterns such as XOR can be resolved deeper down.
pub(super) fn fit(x: &Matrix, y: &[u8], max_depth: usize, min_leaf: usize) -> ModelParams {
    let mut b = Builder {
        x,
        y,
        max_depth,
        min_leaf,
        nodes: Vec::new(),
    };
    b.build((0..x.rows()).collect(), 0);
    ModelParams::Tree { nodes: b.nodes }
}

pub(super) fn score(nodes: &[Node], row: &[f64]) -> f64 {
    let mut i = 0;
    loop {
        match nodes[i] {
            Node::Leaf { score } => return score,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => i = if row[feature] <= threshold { left } else { right },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xor_is_learned() {
        let x = Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ]);
        let y = [0, 1, 1, 0];
        let ModelParams::Tree { nodes } = fit(&x, &y, 10, 1) else {
            unreachable!()
        };
        for (r, &t) in x.iter_rows().zip(&y) {
            assert_eq!(score(&nodes, r), t as f64);
        }
    }

    #[test]
    fn ties_pick_lowest_feature() {
        // Both features separate the classes perfectly.
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]);
        let ModelParams::Tree { nodes } = fit(&x, &[0, 1], 10, 1) else {
            unreachable!()
        };
        assert!(matches!(nodes[0], Node::Split { feature: 0, threshold, .. } if threshold == 0.5));
    }

    #[test]
    fn depth_and_leaf_limits() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let ModelParams::Tree { nodes } = fit(&x, &[0, 1, 0, 1], 1, 1) else {
            unreachable!()
        };
        assert_eq!(nodes.len(), 3);
        let ModelParams::Tree { nodes } = fit(&x, &[0, 1, 0, 1], 10, 3) else {
            unreachable!()
        };
        assert_eq!(nodes.len(), 1);
    }
}
