//! Splitting, metrics and the benchmark grid.

mod bench;
pub mod metrics;
pub mod split;

pub use bench::{
    ablation, ablation_rows, aggregate, importance_profile, mean_and_sample_std, read_results, run_benchmark,
    write_ablation, write_aggregates, write_importances, write_results, AblationOutput, AblationRow, AggregateResult,
    BenchmarkOutput, BenchmarkPlan, DatasetBuilder, EvalError, ImportanceRecord, LeapBuilder, RunResult,
    DEFAULT_CUTOFFS, DEFAULT_SEEDS,
};
pub use metrics::{average_precision, brier, f1_at_half, roc_auc, Metric, MetricError, MetricSet, F1};
pub use split::{stratified_split, Split, SplitError, SplitSpec};
