//! CART trees shared by the forests, the boosting models and their stumps.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    /// Weighted Gini impurity on 0/1 targets.
    Gini,
    /// Weighted squared error on real targets.
    SquaredError,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeConfig {
    pub criterion: Criterion,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Number of candidate features per node; `None` means all.
    pub max_features: Option<usize>,
    /// Draw one uniform threshold per candidate feature instead of scanning.
    pub random_thresholds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
    /// Total weighted impurity decrease per feature, unnormalized.
    impurity_decrease: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Stats {
    w: f64,
    s: f64,
    q: f64,
}

impl Stats {
    fn add(&mut self, w: f64, y: f64) {
        self.w += w;
        self.s += w * y;
        self.q += w * y * y;
    }

    fn minus(self, o: Stats) -> Stats {
        Stats {
            w: self.w - o.w,
            s: self.s - o.s,
            q: self.q - o.q,
        }
    }

    /// Node impurity times node weight.
    fn total_impurity(self, criterion: Criterion) -> f64 {
        if self.w <= 0.0 {
            return 0.0;
        }
        match criterion {
            Criterion::Gini => (2.0 * self.s * (self.w - self.s) / self.w).max(0.0),
            Criterion::SquaredError => (self.q - self.s * self.s / self.w).max(0.0),
        }
    }

    fn mean(self) -> f64 {
        if self.w > 0.0 {
            self.s / self.w
        } else {
            0.0
        }
    }
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Builder<'a, R> {
    x: ArrayView2<'a, f64>,
    targets: &'a [f64],
    weights: &'a [f64],
    config: TreeConfig,
    rng: &'a mut R,
    nodes: Vec<Node>,
    impurity_decrease: Vec<f64>,
    buf: Vec<(f64, usize)>,
}

impl Tree {
    /// Grows a tree on the given rows. Rows with zero weight should be
    /// excluded by the caller; `rows` may contain each index at most once.
    pub fn fit<R: Rng>(
        x: ArrayView2<'_, f64>,
        targets: &[f64],
        weights: &[f64],
        rows: &mut [usize],
        config: TreeConfig,
        rng: &mut R,
    ) -> Tree {
        let mut b = Builder {
            x,
            targets,
            weights,
            config,
            rng,
            nodes: Vec::new(),
            impurity_decrease: vec![0.0; x.ncols()],
            buf: Vec::with_capacity(rows.len()),
        };
        b.grow(rows, 0);
        Tree {
            nodes: b.nodes,
            impurity_decrease: b.impurity_decrease,
        }
    }

    /// Index of the leaf reached by `row`.
    pub fn leaf_of(&self, row: ArrayView1<'_, f64>) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn predict_row(&self, row: ArrayView1<'_, f64>) -> f64 {
        match self.nodes[self.leaf_of(row)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_of returns a leaf"),
        }
    }

    pub fn set_leaf_value(&mut self, leaf: usize, v: f64) {
        if let Node::Leaf { value } = &mut self.nodes[leaf] {
            *value = v;
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn impurity_decrease(&self) -> &[f64] {
        &self.impurity_decrease
    }

    /// Impurity decrease scaled to sum to 1; all zeros for a single leaf.
    pub fn normalized_importances(&self) -> Vec<f64> {
        normalize(self.impurity_decrease.clone())
    }
}

pub(crate) fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    }
    v
}

impl<R: Rng> Builder<'_, R> {
    fn stats(&self, rows: &[usize]) -> Stats {
        let mut s = Stats::default();
        for &r in rows {
            s.add(self.weights[r], self.targets[r]);
        }
        s
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize) -> u32 {
        let id = self.nodes.len() as u32;
        let stats = self.stats(rows);
        self.nodes.push(Node::Leaf { value: stats.mean() });

        let parent = stats.total_impurity(self.config.criterion);
        if depth >= self.config.max_depth
            || rows.len() < 2 * self.config.min_samples_leaf.max(1)
            || parent <= 1e-12 * stats.w.max(1.0)
        {
            return id;
        }
        let Some(best) = self.best_split(rows, stats, parent) else {
            return id;
        };

        let mut split = 0;
        for i in 0..rows.len() {
            if self.x[[rows[i], best.feature]] <= best.threshold {
                rows.swap(i, split);
                split += 1;
            }
        }
        self.impurity_decrease[best.feature] += best.gain.max(0.0);
        let (l, r) = rows.split_at_mut(split);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id as usize] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x.ncols();
        match self.config.max_features {
            Some(k) if k < d => index::sample(self.rng, d, k.max(1)).into_vec(),
            _ => (0..d).collect(),
        }
    }

    fn best_split(&mut self, rows: &[usize], total: Stats, parent: f64) -> Option<BestSplit> {
        let min_leaf = self.config.min_samples_leaf.max(1);
        let criterion = self.config.criterion;
        let mut best: Option<BestSplit> = None;
        for feature in self.candidate_features() {
            let found = if self.config.random_thresholds {
                self.random_split(rows, feature, min_leaf)
            } else {
                self.scan_split(rows, feature, total, min_leaf)
            };
            if let Some((threshold, left)) = found {
                let right = total.minus(left);
                let gain = parent - left.total_impurity(criterion) - right.total_impurity(criterion);
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(BestSplit { feature, threshold, gain });
                }
            }
        }
        best
    }

    /// Exhaustive scan over midpoints between distinct sorted values.
    fn scan_split(&mut self, rows: &[usize], feature: usize, total: Stats, min_leaf: usize) -> Option<(f64, Stats)> {
        let criterion = self.config.criterion;
        self.buf.clear();
        self.buf.extend(rows.iter().map(|&r| (self.x[[r, feature]], r)));
        self.buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let n = self.buf.len();
        if self.buf[0].0 == self.buf[n - 1].0 {
            return None;
        }
        let mut left = Stats::default();
        let mut best: Option<(f64, f64, Stats)> = None;
        for i in 0..n - 1 {
            let (v, r) = self.buf[i];
            left.add(self.weights[r], self.targets[r]);
            let next = self.buf[i + 1].0;
            if v == next || i + 1 < min_leaf || n - i - 1 < min_leaf {
                continue;
            }
            let right = total.minus(left);
            let child = left.total_impurity(criterion) + right.total_impurity(criterion);
            if best.as_ref().is_none_or(|b| child < b.0) {
                let mid = v + (next - v) / 2.0;
                let threshold = if mid < next { mid } else { v };
                best = Some((child, threshold, left));
            }
        }
        best.map(|(_, t, s)| (t, s))
    }

    fn random_split(&mut self, rows: &[usize], feature: usize, min_leaf: usize) -> Option<(f64, Stats)> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &r in rows {
            let v = self.x[[r, feature]];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi <= lo {
            return None;
        }
        let mut threshold = self.rng.random_range(lo..hi);
        if threshold >= hi {
            threshold = lo;
        }
        let mut left = Stats::default();
        let mut n_left = 0;
        for &r in rows {
            if self.x[[r, feature]] <= threshold {
                left.add(self.weights[r], self.targets[r]);
                n_left += 1;
            }
        }
        if n_left < min_leaf || rows.len() - n_left < min_leaf {
            return None;
        }
        Some((threshold, left))
    }
}
