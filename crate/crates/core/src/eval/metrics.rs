use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("{metric} is undefined: {reason}")]
    Undefined { metric: Metric, reason: &'static str },
    #[error("{labels} labels but {scores} scores")]
    LengthMismatch { labels: usize, scores: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    RocAuc,
    PrAuc,
    Brier,
    F1AtHalf,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::RocAuc, Metric::PrAuc, Metric::Brier, Metric::F1AtHalf];

    pub fn name(self) -> &'static str {
        match self {
            Metric::RocAuc => "roc_auc",
            Metric::PrAuc => "pr_auc",
            Metric::Brier => "brier",
            Metric::F1AtHalf => "f1_at_half",
        }
    }

    pub fn parse(s: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn check_lengths(y: &[u8], p: &[f64]) -> Result<(), MetricError> {
    if y.len() != p.len() {
        return Err(MetricError::LengthMismatch {
            labels: y.len(),
            scores: p.len(),
        });
    }
    Ok(())
}

/// Area under the ROC curve as the Mann-Whitney statistic: the fraction of
/// (positive, negative) pairs ranked correctly, ties counting one half.
pub fn roc_auc(y: &[u8], p: &[f64]) -> Result<f64, MetricError> {
    check_lengths(y, p)?;
    let n_pos = y.iter().filter(|&&v| v == 1).count();
    let n_neg = y.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::Undefined {
            metric: Metric::RocAuc,
            reason: "labels contain a single class",
        });
    }
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));

    // Walk tie groups in ascending score order.
    let mut negatives_below = 0u64;
    let mut twice_concordant = 0u64;
    let mut i = 0;
    while i < order.len() {
        let score = p[order[i]];
        let (mut pos, mut neg) = (0u64, 0u64);
        while i < order.len() && p[order[i]] == score {
            if y[order[i]] == 1 {
                pos += 1;
            } else {
                neg += 1;
            }
            i += 1;
        }
        twice_concordant += 2 * pos * negatives_below + pos * neg;
        negatives_below += neg;
    }
    Ok(twice_concordant as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

/// Average precision: mean over positives of the precision at the rank
/// where each positive appears. Ranks follow descending score; equal scores
/// keep their input order.
pub fn average_precision(y: &[u8], p: &[f64]) -> Result<f64, MetricError> {
    check_lengths(y, p)?;
    let n_pos = y.iter().filter(|&&v| v == 1).count();
    if n_pos == 0 {
        return Err(MetricError::Undefined {
            metric: Metric::PrAuc,
            reason: "labels contain no positives",
        });
    }
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| p[b].total_cmp(&p[a]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if y[i] == 1 {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / n_pos as f64)
}

/// Mean squared difference between labels and probabilities. `y` must be
/// non-empty.
pub fn brier(y: &[u8], p: &[f64]) -> f64 {
    debug_assert_eq!(y.len(), p.len());
    y.iter().zip(p).map(|(&t, &q)| (f64::from(t) - q).powi(2)).sum::<f64>() / y.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1 {
    pub value: f64,
    /// No positive labels and no positive predictions: F1 is reported as 0.
    pub degenerate: bool,
}

/// F1 of the hard predictions `p >= 0.5`.
pub fn f1_at_half(y: &[u8], p: &[f64]) -> F1 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&t, &q) in y.iter().zip(p) {
        match (q >= 0.5, t == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return F1 {
            value: 0.0,
            degenerate: fp == 0 && fn_ == 0,
        };
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    F1 {
        value: 2.0 * precision * recall / (precision + recall),
        degenerate: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub roc_auc: f64,
    pub pr_auc: f64,
    pub brier: f64,
    pub f1_at_half: f64,
}

impl MetricSet {
    pub fn compute(y: &[u8], p: &[f64]) -> Result<MetricSet, MetricError> {
        let roc_auc = roc_auc(y, p)?;
        let pr_auc = average_precision(y, p)?;
        let f1 = f1_at_half(y, p);
        if f1.degenerate {
            log::warn!("F1 degenerate: no positives and no positive predictions");
        }
        Ok(MetricSet {
            roc_auc,
            pr_auc,
            brier: brier(y, p),
            f1_at_half: f1.value,
        })
    }

    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::RocAuc => self.roc_auc,
            Metric::PrAuc => self.pr_auc,
            Metric::Brier => self.brier,
            Metric::F1AtHalf => self.f1_at_half,
        }
    }
}
