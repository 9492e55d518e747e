use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{normalize, Criterion, Tree, TreeConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    pub random_thresholds: bool,
}

/// Random forest (bootstrap, scanned thresholds) or extremely randomized
/// trees (full sample, random thresholds), both with sqrt(d) candidate
/// features per node and Gini splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<Tree>,
}

/// Per-tree stream: tree `i` of a fit with `seed` always sees the same draws.
fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

impl Forest {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[u8], config: ForestConfig, seed: u64) -> Forest {
        let n = x.nrows();
        let d = x.ncols();
        let targets: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
        let tree_config = TreeConfig {
            criterion: Criterion::Gini,
            max_depth: config.max_depth,
            min_samples_leaf: config.min_samples_leaf,
            max_features: Some(((d as f64).sqrt() as usize).max(1)),
            random_thresholds: config.random_thresholds,
        };
        let trees = (0..config.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = tree_rng(seed, t);
                let mut weights = vec![0.0; n];
                if config.bootstrap {
                    for _ in 0..n {
                        weights[rng.random_range(0..n)] += 1.0;
                    }
                } else {
                    weights.fill(1.0);
                }
                let mut rows: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
                Tree::fit(x, &targets, &weights, &mut rows, tree_config, &mut rng)
            })
            .collect();
        Forest { trees }
    }

    /// Mean over trees of the leaf positive fraction.
    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        x.outer_iter()
            .map(|row| {
                self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
            })
            .collect()
    }

    /// Mean of per-tree normalized impurity decreases, renormalized.
    pub fn feature_importances(&self, d: usize) -> Vec<f64> {
        let mut acc = vec![0.0; d];
        for t in &self.trees {
            for (a, v) in acc.iter_mut().zip(t.normalized_importances()) {
                *a += v;
            }
        }
        normalize(acc)
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }
}
