use ndarray::{ArrayView2, Axis};
use serde::{Deserialize, Serialize};

/// Gaussian naive Bayes. Variances are inflated by `var_smoothing` times
/// the largest feature variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    log_prior: [f64; 2],
    mean: [Vec<f64>; 2],
    var: [Vec<f64>; 2],
}

impl GaussianNb {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[u8], var_smoothing: f64) -> GaussianNb {
        let d = x.ncols();
        let n = x.nrows() as f64;
        let max_var = x
            .axis_iter(Axis(1))
            .map(|c| {
                let m = c.sum() / n;
                c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n
            })
            .fold(0.0, f64::max);
        let epsilon = var_smoothing * max_var;

        let mut log_prior = [0.0; 2];
        let mut mean = [vec![0.0; d], vec![0.0; d]];
        let mut var = [vec![0.0; d], vec![0.0; d]];
        for class in 0..2u8 {
            let rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
            let c = usize::from(class);
            let nc = rows.len() as f64;
            log_prior[c] = (nc / n).ln();
            for j in 0..d {
                let m = rows.iter().map(|&i| x[[i, j]]).sum::<f64>() / nc;
                let v = rows.iter().map(|&i| (x[[i, j]] - m).powi(2)).sum::<f64>() / nc;
                mean[c][j] = m;
                var[c][j] = v + epsilon;
            }
        }
        // A zero-variance feature in a class with no smoothing budget would
        // give an infinite likelihood; floor it.
        for v in var.iter_mut().flatten() {
            if *v <= 0.0 {
                *v = f64::MIN_POSITIVE;
            }
        }
        GaussianNb { log_prior, mean, var }
    }

    fn joint_log_likelihood(&self, row: ndarray::ArrayView1<'_, f64>, c: usize) -> f64 {
        let mut ll = self.log_prior[c];
        for (j, &v) in row.iter().enumerate() {
            let var = self.var[c][j];
            ll -= 0.5 * (2.0 * std::f64::consts::PI * var).ln() + (v - self.mean[c][j]).powi(2) / (2.0 * var);
        }
        ll
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        x.outer_iter()
            .map(|row| {
                let l0 = self.joint_log_likelihood(row, 0);
                let l1 = self.joint_log_likelihood(row, 1);
                super::sigmoid(l1 - l0)
            })
            .collect()
    }
}
