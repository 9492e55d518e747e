use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

/// k-nearest neighbours on (already standardized) inputs with Euclidean
/// distance. Equal distances are ordered by training-row index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    k: usize,
    train: Array2<f64>,
    labels: Vec<u8>,
}

impl Knn {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[u8], k: usize) -> Knn {
        Knn {
            k: k.max(1),
            train: x.to_owned(),
            labels: y.to_vec(),
        }
    }

    /// Fraction of positive labels among the k nearest training rows. With
    /// k >= n every row is a neighbour and the base rate is returned.
    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        let n = self.train.nrows();
        let k = self.k.min(n);
        let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n);
        x.outer_iter()
            .map(|q| {
                dist.clear();
                for (i, row) in self.train.outer_iter().enumerate() {
                    let d: f64 = row.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                    dist.push((d, i));
                }
                let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                if k < n {
                    dist.select_nth_unstable_by(k - 1, cmp);
                }
                let positives = dist[..k].iter().filter(|(_, i)| self.labels[*i] == 1).count();
                positives as f64 / k as f64
            })
            .collect()
    }
}
