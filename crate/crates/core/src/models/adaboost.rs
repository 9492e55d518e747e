use ndarray::ArrayView2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sigmoid;
use super::tree::{normalize, Criterion, Tree, TreeConfig};

/// Discrete AdaBoost (SAMME, two classes) over Gini stumps.
///
/// Stage weights are `learning_rate * ln((1 - err) / err)`. The margin is
/// the weighted vote in {-1, +1} divided by the total stage weight, and the
/// positive-class probability is its logistic transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    stumps: Vec<Tree>,
    alphas: Vec<f64>,
}

impl AdaBoost {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[u8], n_stages: usize, learning_rate: f64) -> AdaBoost {
        let n = x.nrows();
        let targets: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
        let mut weights = vec![1.0 / n as f64; n];
        let config = TreeConfig {
            criterion: Criterion::Gini,
            max_depth: 1,
            min_samples_leaf: 1,
            max_features: None,
            random_thresholds: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut stumps = Vec::new();
        let mut alphas = Vec::new();
        for _ in 0..n_stages {
            let mut rows: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
            let stump = Tree::fit(x, &targets, &weights, &mut rows, config, &mut rng);
            let wrong: Vec<bool> = x
                .outer_iter()
                .zip(y)
                .map(|(row, &label)| (stump.predict_row(row) >= 0.5) != (label == 1))
                .collect();
            let total: f64 = weights.iter().sum();
            let err = wrong.iter().zip(&weights).filter(|(w, _)| **w).map(|(_, v)| v).sum::<f64>() / total;
            if err <= 0.0 {
                // Perfect stump: keep it and stop.
                stumps.push(stump);
                alphas.push(1.0);
                break;
            }
            if err >= 0.5 {
                if stumps.is_empty() {
                    stumps.push(stump);
                    alphas.push(1.0);
                }
                break;
            }
            let alpha = learning_rate * ((1.0 - err) / err).ln();
            for (w, &bad) in weights.iter_mut().zip(&wrong) {
                if bad {
                    *w *= alpha.exp();
                }
            }
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            stumps.push(stump);
            alphas.push(alpha);
        }
        AdaBoost { stumps, alphas }
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        let total: f64 = self.alphas.iter().sum();
        x.outer_iter()
            .map(|row| {
                let vote: f64 = self
                    .stumps
                    .iter()
                    .zip(&self.alphas)
                    .map(|(s, a)| if s.predict_row(row) >= 0.5 { *a } else { -*a })
                    .sum();
                sigmoid(vote / total)
            })
            .collect()
    }

    /// Stage-weighted mean of stump importances.
    pub fn feature_importances(&self, d: usize) -> Vec<f64> {
        let mut acc = vec![0.0; d];
        for (s, a) in self.stumps.iter().zip(&self.alphas) {
            for (slot, v) in acc.iter_mut().zip(s.normalized_importances()) {
                *slot += a * v;
            }
        }
        normalize(acc)
    }
}
