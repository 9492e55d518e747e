use ndarray::ArrayView2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sigmoid;
use super::tree::{normalize, Criterion, Tree, TreeConfig};

/// Gradient boosting on logistic loss. Each stage fits a squared-error
/// regression tree to the residuals `y - p` and replaces its leaf values
/// with one Newton step `sum(r) / sum(p(1 - p))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gbdt {
    init: f64,
    learning_rate: f64,
    trees: Vec<Tree>,
}

impl Gbdt {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[u8], n_stages: usize, learning_rate: f64, max_depth: usize) -> Gbdt {
        Self::fit_with_trace(x, y, n_stages, learning_rate, max_depth, |_| {})
    }

    /// As [`Gbdt::fit`], calling `on_stage` with the training log-loss before
    /// the first stage and after each stage.
    pub fn fit_with_trace(
        x: ArrayView2<'_, f64>,
        y: &[u8],
        n_stages: usize,
        learning_rate: f64,
        max_depth: usize,
        mut on_stage: impl FnMut(f64),
    ) -> Gbdt {
        let n = x.nrows();
        let labels: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
        let base = labels.iter().sum::<f64>() / n as f64;
        let init = (base / (1.0 - base)).ln();
        let mut raw = vec![init; n];
        let weights = vec![1.0; n];
        let config = TreeConfig {
            criterion: Criterion::SquaredError,
            max_depth,
            min_samples_leaf: 1,
            max_features: None,
            random_thresholds: false,
        };
        // All features are scanned at every node, so the stream is never drawn from.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut trees = Vec::with_capacity(n_stages);
        on_stage(log_loss(&labels, &raw));
        for _ in 0..n_stages {
            let prob: Vec<f64> = raw.iter().map(|&f| sigmoid(f)).collect();
            let residual: Vec<f64> = labels.iter().zip(&prob).map(|(y, p)| y - p).collect();
            let mut rows: Vec<usize> = (0..n).collect();
            let mut tree = Tree::fit(x, &residual, &weights, &mut rows, config, &mut rng);

            let leaves: Vec<usize> = x.outer_iter().map(|row| tree.leaf_of(row)).collect();
            let mut num = vec![0.0; tree.nodes().len()];
            let mut den = vec![0.0; tree.nodes().len()];
            for i in 0..n {
                num[leaves[i]] += residual[i];
                den[leaves[i]] += prob[i] * (1.0 - prob[i]);
            }
            for leaf in 0..num.len() {
                let step = if den[leaf] < 1e-150 { 0.0 } else { num[leaf] / den[leaf] };
                tree.set_leaf_value(leaf, step);
            }
            for (i, r) in raw.iter_mut().enumerate() {
                *r += learning_rate * tree.predict_row(x.row(i));
            }
            trees.push(tree);
            on_stage(log_loss(&labels, &raw));
        }
        Gbdt {
            init,
            learning_rate,
            trees,
        }
    }

    pub fn decision(&self, row: ndarray::ArrayView1<'_, f64>) -> f64 {
        self.init + self.learning_rate * self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        x.outer_iter().map(|row| sigmoid(self.decision(row))).collect()
    }

    /// Impurity decrease summed over all stages, normalized.
    pub fn feature_importances(&self, d: usize) -> Vec<f64> {
        let mut acc = vec![0.0; d];
        for t in &self.trees {
            for (a, v) in acc.iter_mut().zip(t.impurity_decrease()) {
                *a += v;
            }
        }
        normalize(acc)
    }

    pub fn n_stages(&self) -> usize {
        self.trees.len()
    }
}

/// Mean binary cross-entropy from raw scores.
pub fn log_loss(labels: &[f64], raw: &[f64]) -> f64 {
    let softplus = |z: f64| if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
    labels.iter().zip(raw).map(|(y, f)| softplus(*f) - y * f).sum::<f64>() / labels.len() as f64
}
