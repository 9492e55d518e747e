use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::sigmoid;

/// L2-regularized logistic regression fit by batch gradient descent.
///
/// Minimizes `mean log-loss + |w|^2 / (2 C n)` with an unpenalized
/// intercept, so that `C` has the same meaning as in the usual
/// sum-of-losses formulation. The step is `1 / L` for the Frobenius bound
/// on the Lipschitz constant of the gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    coef: Vec<f64>,
    intercept: f64,
    iterations: usize,
}

impl LogisticRegression {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[u8], c: f64, tol: f64, max_iter: usize) -> LogisticRegression {
        let n = x.nrows() as f64;
        let d = x.ncols();
        let labels: Array1<f64> = y.iter().map(|&v| f64::from(v)).collect();
        let penalty = 1.0 / (c * n);
        let frob = x.iter().map(|v| v * v).sum::<f64>() + n;
        let step = 1.0 / (frob / (4.0 * n) + penalty);

        let mut w = Array1::<f64>::zeros(d);
        let mut b = 0.0;
        let mut iterations = 0;
        while iterations < max_iter {
            let z = x.dot(&w) + b;
            let resid: Array1<f64> = z.iter().zip(labels.iter()).map(|(&z, &y)| sigmoid(z) - y).collect();
            let gw = x.t().dot(&resid) / n + &w * penalty;
            let gb = resid.sum() / n;
            let norm = (gw.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();
            if norm < tol {
                break;
            }
            w.scaled_add(-step, &gw);
            b -= step * gb;
            iterations += 1;
        }
        LogisticRegression {
            coef: w.to_vec(),
            intercept: b,
            iterations,
        }
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        x.outer_iter()
            .map(|row| sigmoid(self.intercept + row.iter().zip(&self.coef).map(|(a, b)| a * b).sum::<f64>()))
            .collect()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coef
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_point_separable_set() {
        let x = array![[-1.0], [1.0]];
        let m = LogisticRegression::fit(x.view(), &[0, 1], 1.0, 1e-6, 5000);
        let p = m.predict_proba(x.view());
        assert!(p[1] > 0.5 && 0.5 > p[0]);
    }

    #[test]
    fn stationary_point_satisfies_first_order_condition() {
        // Closed form for the symmetric two-point problem: w solves
        // 1 - sigmoid(w) = w / (C n) with n = 2, C = 1, and b = 0.
        let x = array![[-1.0], [1.0]];
        let m = LogisticRegression::fit(x.view(), &[0, 1], 1.0, 1e-10, 100_000);
        let w = m.coefficients()[0];
        assert!(((1.0 - sigmoid(w)) - w / 2.0).abs() < 1e-8);
        assert!(m.intercept().abs() < 1e-8);
    }
}
