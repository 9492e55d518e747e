//! The benchmark classifiers behind one interface.
//!
//! Each cutoff gets freshly trained models; nothing is shared across fits.
//! Models that need standardized inputs (LR, kNN, MLP) carry a [`Scaler`]
//! fit on their training rows only and apply it inside [`FittedModel::predict_proba`].

mod adaboost;
mod forest;
mod gbdt;
mod knn;
mod logistic;
pub mod mlp;
mod naive_bayes;
mod scaler;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adaboost::AdaBoost;
pub use forest::{Forest, ForestConfig};
pub use gbdt::Gbdt;
pub use knn::Knn;
pub use logistic::LogisticRegression;
pub use mlp::Mlp;
pub use naive_bayes::GaussianNb;
pub use scaler::Scaler;

use crate::features::FEATURE_NAMES;

/// Serialization format version for [`FittedModel::to_json`].
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    Lr,
    Rf,
    ExtraTrees,
    Gbdt,
    AdaBoost,
    Knn,
    Nb,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 8] = [
        ModelKind::Lr,
        ModelKind::Rf,
        ModelKind::ExtraTrees,
        ModelKind::Gbdt,
        ModelKind::AdaBoost,
        ModelKind::Knn,
        ModelKind::Nb,
        ModelKind::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lr => "LR",
            ModelKind::Rf => "RF",
            ModelKind::ExtraTrees => "ExtraTrees",
            ModelKind::Gbdt => "GBDT",
            ModelKind::AdaBoost => "AdaBoost",
            ModelKind::Knn => "kNN",
            ModelKind::Nb => "NB",
            ModelKind::Mlp => "MLP",
        }
    }

    pub fn needs_standardization(self) -> bool {
        matches!(self, ModelKind::Lr | ModelKind::Knn | ModelKind::Mlp)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown model `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Hyperparameters {
    Logistic {
        /// Inverse regularization strength.
        c: f64,
        tol: f64,
        max_iter: usize,
    },
    Forest {
        n_trees: usize,
        max_depth: usize,
        min_samples_leaf: usize,
        bootstrap: bool,
        random_thresholds: bool,
    },
    Gbdt {
        n_stages: usize,
        learning_rate: f64,
        max_depth: usize,
    },
    AdaBoost {
        n_stages: usize,
        learning_rate: f64,
    },
    Knn {
        k: usize,
    },
    NaiveBayes {
        var_smoothing: f64,
    },
    Mlp {
        hidden: [usize; 2],
        epochs: usize,
        learning_rate: f64,
        batch_size: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub params: Hyperparameters,
}

impl ModelSpec {
    /// The fixed benchmark configuration for `kind`.
    pub fn benchmark(kind: ModelKind) -> Self {
        let params = match kind {
            ModelKind::Lr => Hyperparameters::Logistic {
                c: 1.0,
                tol: 1e-6,
                max_iter: 5000,
            },
            ModelKind::Rf | ModelKind::ExtraTrees => Hyperparameters::Forest {
                n_trees: 300,
                max_depth: 16,
                min_samples_leaf: 2,
                bootstrap: kind == ModelKind::Rf,
                random_thresholds: kind == ModelKind::ExtraTrees,
            },
            ModelKind::Gbdt => Hyperparameters::Gbdt {
                n_stages: 250,
                learning_rate: 0.05,
                max_depth: 3,
            },
            ModelKind::AdaBoost => Hyperparameters::AdaBoost {
                n_stages: 200,
                learning_rate: 0.5,
            },
            ModelKind::Knn => Hyperparameters::Knn { k: 15 },
            ModelKind::Nb => Hyperparameters::NaiveBayes { var_smoothing: 1e-9 },
            ModelKind::Mlp => Hyperparameters::Mlp {
                hidden: [64, 32],
                epochs: 300,
                learning_rate: 1e-3,
                batch_size: 64,
            },
        };
        ModelSpec { kind, params }
    }

    pub fn needs_standardization(&self) -> bool {
        self.kind.needs_standardization()
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("labels must be 0 or 1, found {0}")]
    InvalidLabel(u8),
    #[error("non-finite value in input at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("input has {got} columns, model was trained on {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{rows} feature rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("empty training matrix")]
    Empty,
    #[error("hyperparameters do not match model kind {0}")]
    SpecMismatch(ModelKind),
    #[error("feature importance is not defined for {0}")]
    ImportanceUnsupported(ModelKind),
    #[error("model blob: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedParams {
    Logistic(LogisticRegression),
    Forest(Forest),
    Gbdt(Gbdt),
    AdaBoost(AdaBoost),
    Knn(Knn),
    NaiveBayes(GaussianNb),
    Mlp(Mlp),
}

/// A predictor trained for one cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub seed: u64,
    pub scaler: Option<Scaler>,
    pub n_train: usize,
    pub n_features: usize,
    pub base_rate: f64,
    pub params: FittedParams,
}

#[derive(Serialize, Deserialize)]
struct ModelBlob {
    format_version: u32,
    model: FittedModel,
}

fn check_finite(x: ArrayView2<'_, f64>) -> Result<(), ModelError> {
    for ((row, col), v) in x.indexed_iter() {
        if !v.is_finite() {
            return Err(ModelError::NonFinite { row, col });
        }
    }
    Ok(())
}

/// Fits `spec` on (`x`, `y`). Deterministic in (spec, x, y, seed).
pub fn train_model(spec: &ModelSpec, x: ArrayView2<'_, f64>, y: &[u8], seed: u64) -> Result<FittedModel, ModelError> {
    if x.nrows() != y.len() {
        return Err(ModelError::LengthMismatch { rows: x.nrows(), labels: y.len() });
    }
    if x.nrows() == 0 {
        return Err(ModelError::Empty);
    }
    if let Some(&bad) = y.iter().find(|&&v| v > 1) {
        return Err(ModelError::InvalidLabel(bad));
    }
    let positives = y.iter().filter(|&&v| v == 1).count();
    if positives == 0 || positives == y.len() {
        return Err(ModelError::SingleClass);
    }
    check_finite(x)?;

    let (scaler, scaled): (Option<Scaler>, Option<Array2<f64>>) = if spec.needs_standardization() {
        let s = Scaler::fit(x)?;
        let xs = s.apply(x);
        (Some(s), Some(xs))
    } else {
        (None, None)
    };
    let xv = scaled.as_ref().map_or(x, |a| a.view());

    let params = match (&spec.kind, &spec.params) {
        (ModelKind::Lr, Hyperparameters::Logistic { c, tol, max_iter }) => {
            FittedParams::Logistic(LogisticRegression::fit(xv, y, *c, *tol, *max_iter))
        }
        (
            ModelKind::Rf | ModelKind::ExtraTrees,
            Hyperparameters::Forest {
                n_trees,
                max_depth,
                min_samples_leaf,
                bootstrap,
                random_thresholds,
            },
        ) => FittedParams::Forest(Forest::fit(
            xv,
            y,
            forest::ForestConfig {
                n_trees: *n_trees,
                max_depth: *max_depth,
                min_samples_leaf: *min_samples_leaf,
                bootstrap: *bootstrap,
                random_thresholds: *random_thresholds,
            },
            seed,
        )),
        (ModelKind::Gbdt, Hyperparameters::Gbdt { n_stages, learning_rate, max_depth }) => {
            FittedParams::Gbdt(Gbdt::fit(xv, y, *n_stages, *learning_rate, *max_depth))
        }
        (ModelKind::AdaBoost, Hyperparameters::AdaBoost { n_stages, learning_rate }) => {
            FittedParams::AdaBoost(AdaBoost::fit(xv, y, *n_stages, *learning_rate))
        }
        (ModelKind::Knn, Hyperparameters::Knn { k }) => FittedParams::Knn(Knn::fit(xv, y, *k)),
        (ModelKind::Nb, Hyperparameters::NaiveBayes { var_smoothing }) => {
            FittedParams::NaiveBayes(GaussianNb::fit(xv, y, *var_smoothing))
        }
        (
            ModelKind::Mlp,
            Hyperparameters::Mlp {
                hidden,
                epochs,
                learning_rate,
                batch_size,
            },
        ) => FittedParams::Mlp(Mlp::fit(
            xv,
            y,
            mlp::MlpConfig {
                hidden: *hidden,
                epochs: *epochs,
                learning_rate: *learning_rate,
                batch_size: *batch_size,
            },
            seed,
        )),
        (kind, _) => return Err(ModelError::SpecMismatch(*kind)),
    };

    Ok(FittedModel {
        spec: spec.clone(),
        seed,
        scaler,
        n_train: x.nrows(),
        n_features: x.ncols(),
        base_rate: positives as f64 / y.len() as f64,
        params,
    })
}

impl FittedModel {
    /// Positive-class probabilities, one per row, each in [0, 1].
    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>, ModelError> {
        if x.ncols() != self.n_features {
            return Err(ModelError::DimensionMismatch {
                expected: self.n_features,
                got: x.ncols(),
            });
        }
        check_finite(x)?;
        let scaled = self.scaler.as_ref().map(|s| s.apply(x));
        let xv = scaled.as_ref().map_or(x, |a| a.view());
        let raw = match &self.params {
            FittedParams::Logistic(m) => m.predict_proba(xv),
            FittedParams::Forest(m) => m.predict_proba(xv),
            FittedParams::Gbdt(m) => m.predict_proba(xv),
            FittedParams::AdaBoost(m) => m.predict_proba(xv),
            FittedParams::Knn(m) => m.predict_proba(xv),
            FittedParams::NaiveBayes(m) => m.predict_proba(xv),
            FittedParams::Mlp(m) => m.predict_proba(xv),
        };
        Ok(raw.into_iter().map(|p| if p.is_nan() { 0.5 } else { p.clamp(0.0, 1.0) }).collect())
    }

    /// Per-feature importances in the model's input order: normalized total
    /// impurity decrease for tree models, absolute standardized coefficients
    /// for LR.
    pub fn importances(&self) -> Result<Vec<f64>, ModelError> {
        match &self.params {
            FittedParams::Logistic(m) => Ok(m.coefficients().iter().map(|c| c.abs()).collect()),
            FittedParams::Forest(m) => Ok(m.feature_importances(self.n_features)),
            FittedParams::Gbdt(m) => Ok(m.feature_importances(self.n_features)),
            FittedParams::AdaBoost(m) => Ok(m.feature_importances(self.n_features)),
            _ => Err(ModelError::ImportanceUnsupported(self.spec.kind)),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelBlob {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        })
        .expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let blob: ModelBlob = serde_json::from_str(text).map_err(|e| ModelError::Format(e.to_string()))?;
        if blob.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::Format(format!(
                "unsupported format version {}",
                blob.format_version
            )));
        }
        Ok(blob.model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub model: ModelKind,
    pub cutoff: i32,
    /// (feature, weight) sorted by descending weight; ties keep feature order.
    pub ranking: Vec<(String, f64)>,
}

impl ImportanceReport {
    pub fn top(&self) -> Option<&str> {
        self.ranking.first().map(|(n, _)| n.as_str())
    }
}

/// Ranked importances for a model trained on the standard feature layout.
pub fn feature_importance(model: &FittedModel, cutoff: i32) -> Result<ImportanceReport, ModelError> {
    let weights = model.importances()?;
    let names: Vec<String> = if weights.len() == FEATURE_NAMES.len() {
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        (0..weights.len()).map(|j| format!("feature_{j}")).collect()
    };
    Ok(ImportanceReport {
        model: model.spec.kind,
        cutoff,
        ranking: rank(&names, &weights),
    })
}

fn rank(names: &[String], weights: &[f64]) -> Vec<(String, f64)> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    // Stable sort keeps feature order among equal weights.
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));
    order.into_iter().map(|j| (names[j].clone(), weights[j])).collect()
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
