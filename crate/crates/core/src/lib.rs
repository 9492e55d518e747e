//! Leakage-controlled early outcome prediction from LMS interaction logs.
//!
//! The pipeline for each cutoff day `t` is: truncate every timestamped
//! source to `t` ([`guard`]), join against static metadata, aggregate into
//! ten features while recording provenance ([`features`]), audit, then train
//! and score the classifier zoo ([`models`], [`eval`]).

pub mod dataset;
pub mod eval;
pub mod features;
pub mod guard;
pub mod models;

pub use dataset::{build_cohort, generate_synthetic, load_tables, Cohort, DatasetError, RawTables, SynthConfig};
pub use eval::{run_benchmark, BenchmarkPlan, EvalError, LeapBuilder};
pub use features::{build_cutoff_dataset, CutoffDataset, FeatureError, FEATURE_NAMES};
pub use guard::LeakagePolicy;
pub use models::{train_model, FittedModel, ModelError, ModelKind, ModelSpec};
