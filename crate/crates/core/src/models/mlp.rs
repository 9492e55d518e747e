//! Two-hidden-layer perceptron with ReLU units and a logistic output,
//! trained on mean cross-entropy with Adam.
//!
//! Parameters live in one flat vector laid out as
//! `W1 (h1 x d), b1, W2 (h2 x h1), b2, w3 (h2), b3`, row-major.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sigmoid;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlpConfig {
    pub hidden: [usize; 2],
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub inputs: usize,
    pub hidden: [usize; 2],
}

impl Layout {
    pub fn n_params(&self) -> usize {
        let [h1, h2] = self.hidden;
        h1 * self.inputs + h1 + h2 * h1 + h2 + h2 + 1
    }

    fn offsets(&self) -> [usize; 6] {
        let [h1, h2] = self.hidden;
        let w1 = 0;
        let b1 = w1 + h1 * self.inputs;
        let w2 = b1 + h1;
        let b2 = w2 + h2 * h1;
        let w3 = b2 + h2;
        let b3 = w3 + h2;
        [w1, b1, w2, b2, w3, b3]
    }
}

struct Weights<'a> {
    w1: ArrayView2<'a, f64>,
    b1: ArrayView1<'a, f64>,
    w2: ArrayView2<'a, f64>,
    b2: ArrayView1<'a, f64>,
    w3: ArrayView1<'a, f64>,
    b3: f64,
}

fn unpack<'a>(layout: &Layout, params: &'a [f64]) -> Weights<'a> {
    let [h1, h2] = layout.hidden;
    let [o_w1, o_b1, o_w2, o_b2, o_w3, o_b3] = layout.offsets();
    let view = |lo: usize, hi: usize| ArrayView1::from(&params[lo..hi]);
    Weights {
        w1: ArrayView2::from_shape((h1, layout.inputs), &params[o_w1..o_b1]).expect("layout"),
        b1: view(o_b1, o_w2),
        w2: ArrayView2::from_shape((h2, h1), &params[o_w2..o_b2]).expect("layout"),
        b2: view(o_b2, o_w3),
        w3: view(o_w3, o_b3),
        b3: params[o_b3],
    }
}

/// Output logits for each row of `x`.
fn forward(layout: &Layout, params: &[f64], x: ArrayView2<'_, f64>) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
    let w = unpack(layout, params);
    let a1 = (x.dot(&w.w1.t()) + w.b1).mapv(|v| v.max(0.0));
    let a2 = (a1.dot(&w.w2.t()) + w.b2).mapv(|v| v.max(0.0));
    let z = a2.dot(&w.w3) + w.b3;
    (a1, a2, z)
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean cross-entropy of `params` on (`x`, `y`) and its gradient.
pub fn loss_and_gradient(layout: &Layout, params: &[f64], x: ArrayView2<'_, f64>, y: &[f64]) -> (f64, Vec<f64>) {
    let n = x.nrows() as f64;
    let w = unpack(layout, params);
    let (a1, a2, z) = forward(layout, params, x);
    let loss = z.iter().zip(y).map(|(&z, &t)| softplus(z) - t * z).sum::<f64>() / n;

    let dz: Array1<f64> = z.iter().zip(y).map(|(&z, &t)| (sigmoid(z) - t) / n).collect();
    let mut grad = vec![0.0; layout.n_params()];
    let [o_w1, o_b1, o_w2, o_b2, o_w3, o_b3] = layout.offsets();

    let g_w3 = a2.t().dot(&dz);
    grad[o_w3..o_b3].copy_from_slice(g_w3.as_slice().expect("contiguous"));
    grad[o_b3] = dz.sum();

    // dz (n) -> delta2 (n x h2)
    let mut delta2 = dz.insert_axis(Axis(1)).dot(&w.w3.insert_axis(Axis(0)));
    delta2.zip_mut_with(&a2, |d, &a| {
        if a <= 0.0 {
            *d = 0.0
        }
    });
    let g_w2 = delta2.t().dot(&a1);
    grad[o_w2..o_b2].copy_from_slice(g_w2.as_standard_layout().as_slice().expect("contiguous"));
    grad[o_b2..o_w3].copy_from_slice(delta2.sum_axis(Axis(0)).as_slice().expect("contiguous"));

    let mut delta1 = delta2.dot(&w.w2);
    delta1.zip_mut_with(&a1, |d, &a| {
        if a <= 0.0 {
            *d = 0.0
        }
    });
    let g_w1 = delta1.t().dot(&x);
    grad[o_w1..o_b1].copy_from_slice(g_w1.as_standard_layout().as_slice().expect("contiguous"));
    grad[o_b1..o_w2].copy_from_slice(delta1.sum_axis(Axis(0)).as_slice().expect("contiguous"));

    (loss, grad)
}

/// Glorot-uniform weights, zero biases.
pub fn init_params(layout: &Layout, rng: &mut impl Rng) -> Vec<f64> {
    let mut params = vec![0.0; layout.n_params()];
    let [h1, h2] = layout.hidden;
    let [o_w1, o_b1, o_w2, o_b2, o_w3, o_b3] = layout.offsets();
    for (lo, hi, fan_in, fan_out) in [
        (o_w1, o_b1, layout.inputs, h1),
        (o_w2, o_b2, h1, h2),
        (o_w3, o_b3, h2, 1),
    ] {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for p in &mut params[lo..hi] {
            *p = rng.random_range(-limit..limit);
        }
    }
    params
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layout: Layout,
    params: Vec<f64>,
}

impl Mlp {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[u8], config: MlpConfig, seed: u64) -> Mlp {
        let layout = Layout {
            inputs: x.ncols(),
            hidden: config.hidden,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = init_params(&layout, &mut rng);
        let labels: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
        let n = x.nrows();
        let batch = config.batch_size.max(1);

        let mut m = vec![0.0; params.len()];
        let mut v = vec![0.0; params.len()];
        let mut t = 0i32;
        let mut order: Vec<usize> = (0..n).collect();
        let mut xb = Array2::<f64>::zeros((batch, x.ncols()));
        let mut yb = vec![0.0; batch];
        for _ in 0..config.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(batch) {
                for (r, &i) in chunk.iter().enumerate() {
                    xb.row_mut(r).assign(&x.row(i));
                    yb[r] = labels[i];
                }
                let rows = chunk.len();
                let (_, grad) = loss_and_gradient(&layout, &params, xb.slice(s![..rows, ..]), &yb[..rows]);
                t += 1;
                let c1 = 1.0 - BETA1.powi(t);
                let c2 = 1.0 - BETA2.powi(t);
                for j in 0..params.len() {
                    m[j] = BETA1 * m[j] + (1.0 - BETA1) * grad[j];
                    v[j] = BETA2 * v[j] + (1.0 - BETA2) * grad[j] * grad[j];
                    params[j] -= config.learning_rate * (m[j] / c1) / ((v[j] / c2).sqrt() + EPS);
                }
            }
        }
        Mlp { layout, params }
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        let (_, _, z) = forward(&self.layout, &self.params, x);
        z.iter().map(|&z| sigmoid(z)).collect()
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn parameter_count() {
        let l = Layout { inputs: 10, hidden: [64, 32] };
        assert_eq!(l.n_params(), 640 + 64 + 2048 + 32 + 32 + 1);
    }

    #[test]
    fn learns_a_separable_problem() {
        let x = array![[-2.0, 0.1], [-1.0, -0.3], [-1.5, 0.2], [1.0, 0.0], [2.0, -0.1], [1.5, 0.4]];
        let cfg = MlpConfig {
            hidden: [8, 4],
            epochs: 300,
            learning_rate: 1e-2,
            batch_size: 2,
        };
        let m = Mlp::fit(x.view(), &[0, 0, 0, 1, 1, 1], cfg, 1);
        let p = m.predict_proba(x.view());
        assert!(p[..3].iter().all(|&v| v < 0.5) && p[3..].iter().all(|&v| v > 0.5));
    }
}
