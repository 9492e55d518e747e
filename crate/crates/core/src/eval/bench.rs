use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::time::Instant;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::metrics::{Metric, MetricError, MetricSet};
use super::split::{stratified_split, Split, SplitError, SplitSpec};
use crate::dataset::Cohort;
use crate::features::{build_cutoff_dataset, CutoffDataset, FeatureError};
use crate::guard::LeakagePolicy;
use crate::models::{feature_importance, train_model, ImportanceReport, ModelError, ModelKind, ModelSpec};

pub const DEFAULT_CUTOFFS: [i32; 8] = [7, 14, 21, 28, 35, 42, 49, 56];
pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

/// Produces the dataset for one (cutoff, policy). The benchmark calls this
/// once per pair.
pub trait DatasetBuilder: Sync {
    fn build(&self, cohort: &Cohort, t: i32, policy: LeakagePolicy) -> Result<CutoffDataset, FeatureError>;
}

/// The standard truncate-join-aggregate-audit pipeline.
#[derive(Debug, Clone, Copy, Default)]
pub struct LeapBuilder;

impl DatasetBuilder for LeapBuilder {
    fn build(&self, cohort: &Cohort, t: i32, policy: LeakagePolicy) -> Result<CutoffDataset, FeatureError> {
        build_cutoff_dataset(cohort, t, policy)
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("split for seed {seed}: {source}")]
    Split { seed: u64, source: SplitError },
    #[error("{policy} t={cutoff} {model} seed {seed}: {source}")]
    Model {
        policy: LeakagePolicy,
        cutoff: i32,
        model: ModelKind,
        seed: u64,
        source: ModelError,
    },
    #[error("{policy} t={cutoff} {model} seed {seed}: {source}")]
    Metric {
        policy: LeakagePolicy,
        cutoff: i32,
        model: ModelKind,
        seed: u64,
        source: MetricError,
    },
    #[error("incomplete seed sets: {}", .0.join("; "))]
    MissingSeeds(Vec<String>),
    #[error("benchmark plan: {0}")]
    Plan(String),
    #[error("results file line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl EvalError {
    pub fn is_protocol_violation(&self) -> bool {
        matches!(self, EvalError::Feature(FeatureError::AuditFailed(_)))
    }

    pub fn is_metric_undefined(&self) -> bool {
        matches!(self, EvalError::Metric { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkPlan {
    pub cutoffs: Vec<i32>,
    pub models: Vec<ModelKind>,
    pub seeds: Vec<u64>,
    pub policies: Vec<LeakagePolicy>,
    /// Fill `wall_seconds`. Off by default so results files are reproducible
    /// byte for byte.
    pub record_timings: bool,
    /// Importances are computed for supporting models at the first seed.
    pub importances: bool,
}

impl Default for BenchmarkPlan {
    fn default() -> Self {
        BenchmarkPlan {
            cutoffs: DEFAULT_CUTOFFS.to_vec(),
            models: ModelKind::ALL.to_vec(),
            seeds: DEFAULT_SEEDS.to_vec(),
            policies: vec![LeakagePolicy::Strict],
            record_timings: false,
            importances: true,
        }
    }
}

impl BenchmarkPlan {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.cutoffs.is_empty() || self.models.is_empty() || self.seeds.is_empty() || self.policies.is_empty() {
            return Err(EvalError::Plan("cutoffs, models, seeds and policies must be non-empty".into()));
        }
        if self.cutoffs[0] <= 0 || self.cutoffs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EvalError::Plan("cutoffs must be strictly increasing positive integers".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub policy: LeakagePolicy,
    pub cutoff: i32,
    pub model: ModelKind,
    pub seed: u64,
    pub metrics: MetricSet,
    pub wall_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceRecord {
    pub policy: LeakagePolicy,
    pub seed: u64,
    pub report: ImportanceReport,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutput {
    pub results: Vec<RunResult>,
    pub importances: Vec<ImportanceRecord>,
    /// One per (policy, cutoff), in plan order.
    pub datasets: Vec<CutoffDataset>,
}

struct Cell {
    dataset: usize,
    model: ModelKind,
    seed_idx: usize,
}

fn take_rows(x: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    x.select(Axis(0), rows)
}

/// Trains and scores every (policy, cutoff, model, seed) cell of `plan`.
///
/// Datasets are built once per (policy, cutoff) before any training, so a
/// strict audit failure aborts the run before results exist. Splits depend
/// only on labels and seed, hence are shared across policies and cutoffs.
/// Results come back in plan order whatever the completion order.
pub fn run_benchmark(
    cohort: &Cohort,
    plan: &BenchmarkPlan,
    builder: &dyn DatasetBuilder,
) -> Result<BenchmarkOutput, EvalError> {
    plan.validate()?;
    let mut datasets = Vec::new();
    for &policy in &plan.policies {
        for &t in &plan.cutoffs {
            log::info!("building dataset {policy} t={t}");
            datasets.push(builder.build(cohort, t, policy)?);
        }
    }
    let labels = cohort.labels();
    let splits: Vec<Split> = plan
        .seeds
        .iter()
        .map(|&seed| stratified_split(&labels, SplitSpec::new(seed)).map_err(|source| EvalError::Split { seed, source }))
        .collect::<Result<_, _>>()?;

    let mut cells = Vec::new();
    for d in 0..datasets.len() {
        for &model in &plan.models {
            for seed_idx in 0..plan.seeds.len() {
                cells.push(Cell { dataset: d, model, seed_idx });
            }
        }
    }

    let outcomes: Vec<Result<(RunResult, Option<ImportanceRecord>), EvalError>> = cells
        .par_iter()
        .map(|cell| {
            let ds = &datasets[cell.dataset];
            let seed = plan.seeds[cell.seed_idx];
            let split = &splits[cell.seed_idx];
            let started = Instant::now();
            let x_train = take_rows(&ds.features, &split.train);
            let y_train: Vec<u8> = split.train.iter().map(|&i| ds.labels[i]).collect();
            let x_test = take_rows(&ds.features, &split.test);
            let y_test: Vec<u8> = split.test.iter().map(|&i| ds.labels[i]).collect();
            let model_err = |source| EvalError::Model {
                policy: ds.policy,
                cutoff: ds.cutoff,
                model: cell.model,
                seed,
                source,
            };
            let fitted = train_model(&ModelSpec::benchmark(cell.model), x_train.view(), &y_train, seed)
                .map_err(model_err)?;
            let p = fitted.predict_proba(x_test.view()).map_err(model_err)?;
            let metrics = MetricSet::compute(&y_test, &p).map_err(|source| EvalError::Metric {
                policy: ds.policy,
                cutoff: ds.cutoff,
                model: cell.model,
                seed,
                source,
            })?;
            let wall = started.elapsed().as_secs_f64();
            let importance = if plan.importances && cell.seed_idx == 0 {
                feature_importance(&fitted, ds.cutoff).ok().map(|report| ImportanceRecord {
                    policy: ds.policy,
                    seed,
                    report,
                })
            } else {
                None
            };
            log::debug!("{} t={} {} seed {seed}: auc {:.4}", ds.policy, ds.cutoff, cell.model, metrics.roc_auc);
            Ok((
                RunResult {
                    policy: ds.policy,
                    cutoff: ds.cutoff,
                    model: cell.model,
                    seed,
                    metrics,
                    wall_seconds: plan.record_timings.then_some(wall),
                },
                importance,
            ))
        })
        .collect();

    let mut results = Vec::with_capacity(outcomes.len());
    let mut importances = Vec::new();
    for o in outcomes {
        let (r, imp) = o?;
        results.push(r);
        importances.extend(imp);
    }
    Ok(BenchmarkOutput {
        results,
        importances,
        datasets,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub policy: LeakagePolicy,
    pub cutoff: i32,
    pub model: ModelKind,
    pub metric: Metric,
    pub mean: f64,
    /// Sample standard deviation (n - 1).
    pub std: f64,
    pub n_seeds: usize,
}

pub fn mean_and_sample_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Mean and sample std per (policy, cutoff, model, metric). Every cell must
/// carry exactly `expected_seeds`.
pub fn aggregate(results: &[RunResult], expected_seeds: &[u64]) -> Result<Vec<AggregateResult>, EvalError> {
    let mut cells: BTreeMap<(LeakagePolicy, i32, ModelKind), BTreeMap<u64, &RunResult>> = BTreeMap::new();
    for r in results {
        cells.entry((r.policy, r.cutoff, r.model)).or_default().insert(r.seed, r);
    }
    let mut expected = expected_seeds.to_vec();
    expected.sort_unstable();
    expected.dedup();

    let mut missing = Vec::new();
    for ((policy, t, model), by_seed) in &cells {
        let have: Vec<u64> = by_seed.keys().copied().collect();
        let dupes = results
            .iter()
            .filter(|r| (r.policy, r.cutoff, r.model) == (*policy, *t, *model))
            .count()
            != have.len();
        if have != expected || dupes {
            let absent: Vec<String> = expected.iter().filter(|s| !by_seed.contains_key(s)).map(u64::to_string).collect();
            let extra: Vec<String> = have.iter().filter(|s| !expected.contains(s)).map(u64::to_string).collect();
            let mut msg = format!("{policy} t={t} {model}:");
            if !absent.is_empty() {
                msg += &format!(" missing seeds {}", absent.join(","));
            }
            if !extra.is_empty() {
                msg += &format!(" unexpected seeds {}", extra.join(","));
            }
            if dupes {
                msg += " duplicate seeds";
            }
            missing.push(msg);
        }
    }
    if !missing.is_empty() {
        return Err(EvalError::MissingSeeds(missing));
    }

    let mut out = Vec::new();
    for ((policy, cutoff, model), by_seed) in cells {
        for metric in Metric::ALL {
            let values: Vec<f64> = by_seed.values().map(|r| r.metrics.get(metric)).collect();
            let (mean, std) = mean_and_sample_std(&values);
            out.push(AggregateResult {
                policy,
                cutoff,
                model,
                metric,
                mean,
                std,
                n_seeds: values.len(),
            });
        }
    }
    Ok(out)
}

/// Strict-vs-leaky comparison of aggregated means for one cell and metric.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub cutoff: i32,
    pub model: ModelKind,
    pub metric: Metric,
    pub strict: f64,
    pub leaky_assessment: f64,
    pub leaky_all: f64,
}

impl AblationRow {
    pub fn delta_assessment(&self) -> f64 {
        self.leaky_assessment - self.strict
    }

    pub fn delta_all(&self) -> f64 {
        self.leaky_all - self.strict
    }
}

#[derive(Debug, Clone)]
pub struct AblationOutput {
    pub results: Vec<RunResult>,
    pub aggregates: Vec<AggregateResult>,
    pub rows: Vec<AblationRow>,
}

/// Runs the three policies on identical splits and tabulates the deltas.
pub fn ablation(
    cohort: &Cohort,
    cutoffs: &[i32],
    models: &[ModelKind],
    seeds: &[u64],
    builder: &dyn DatasetBuilder,
) -> Result<AblationOutput, EvalError> {
    let plan = BenchmarkPlan {
        cutoffs: cutoffs.to_vec(),
        models: models.to_vec(),
        seeds: seeds.to_vec(),
        policies: LeakagePolicy::ALL.to_vec(),
        record_timings: false,
        importances: false,
    };
    let out = run_benchmark(cohort, &plan, builder)?;
    let aggregates = aggregate(&out.results, seeds)?;
    Ok(AblationOutput {
        rows: ablation_rows(&aggregates),
        results: out.results,
        aggregates,
    })
}

/// Pairs up aggregates of the three policies; cells missing a policy are
/// skipped.
pub fn ablation_rows(aggregates: &[AggregateResult]) -> Vec<AblationRow> {
    let mut by_cell: BTreeMap<(i32, ModelKind, Metric), [Option<f64>; 3]> = BTreeMap::new();
    for a in aggregates {
        let slot = LeakagePolicy::ALL.iter().position(|p| *p == a.policy).expect("known policy");
        by_cell.entry((a.cutoff, a.model, a.metric)).or_default()[slot] = Some(a.mean);
    }
    by_cell
        .into_iter()
        .filter_map(|((cutoff, model, metric), v)| match v {
            [Some(strict), Some(leaky_assessment), Some(leaky_all)] => Some(AblationRow {
                cutoff,
                model,
                metric,
                strict,
                leaky_assessment,
                leaky_all,
            }),
            _ => None,
        })
        .collect()
}

/// Strict importance rankings per (cutoff, model) at one seed.
pub fn importance_profile(
    cohort: &Cohort,
    cutoffs: &[i32],
    models: &[ModelKind],
    seed: u64,
    builder: &dyn DatasetBuilder,
) -> Result<Vec<ImportanceReport>, EvalError> {
    if let Some(&bad) = models
        .iter()
        .find(|m| matches!(m, ModelKind::Knn | ModelKind::Nb | ModelKind::Mlp))
    {
        return Err(EvalError::Model {
            policy: LeakagePolicy::Strict,
            cutoff: cutoffs.first().copied().unwrap_or_default(),
            model: bad,
            seed,
            source: ModelError::ImportanceUnsupported(bad),
        });
    }
    let plan = BenchmarkPlan {
        cutoffs: cutoffs.to_vec(),
        models: models.to_vec(),
        seeds: vec![seed],
        policies: vec![LeakagePolicy::Strict],
        record_timings: false,
        importances: true,
    };
    let out = run_benchmark(cohort, &plan, builder)?;
    Ok(out.importances.into_iter().map(|r| r.report).collect())
}

const RESULTS_HEADER: [&str; 9] = [
    "policy",
    "cutoff",
    "model",
    "seed",
    "roc_auc",
    "pr_auc",
    "brier",
    "f1_at_half",
    "wall_seconds",
];

pub fn write_results<W: Write>(out: W, results: &[RunResult]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in results {
        w.write_record([
            r.policy.as_str().to_string(),
            r.cutoff.to_string(),
            r.model.name().to_string(),
            r.seed.to_string(),
            r.metrics.roc_auc.to_string(),
            r.metrics.pr_auc.to_string(),
            r.metrics.brier.to_string(),
            r.metrics.f1_at_half.to_string(),
            r.wall_seconds.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<R: Read>(input: R) -> Result<Vec<RunResult>, EvalError> {
    let mut r = csv::ReaderBuilder::new().flexible(false).from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(RESULTS_HEADER) {
        return Err(EvalError::Parse {
            line: 1,
            message: format!("expected header {}", RESULTS_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |message: String| EvalError::Parse { line, message };
        let num = |i: usize| -> Result<f64, EvalError> {
            let v: f64 = rec[i].parse().map_err(|_| bad(format!("{}: not a number", RESULTS_HEADER[i])))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(bad(format!("{} = {v} outside [0, 1]", RESULTS_HEADER[i])));
            }
            Ok(v)
        };
        out.push(RunResult {
            policy: rec[0].parse().map_err(bad)?,
            cutoff: rec[1].parse().map_err(|_| bad("cutoff: not an integer".into()))?,
            model: rec[2].parse().map_err(bad)?,
            seed: rec[3].parse().map_err(|_| bad("seed: not an integer".into()))?,
            metrics: MetricSet {
                roc_auc: num(4)?,
                pr_auc: num(5)?,
                brier: num(6)?,
                f1_at_half: num(7)?,
            },
            wall_seconds: if rec[8].is_empty() {
                None
            } else {
                Some(rec[8].parse().map_err(|_| bad("wall_seconds: not a number".into()))?)
            },
        });
    }
    Ok(out)
}

pub fn write_aggregates<W: Write>(out: W, aggregates: &[AggregateResult]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["policy", "cutoff", "model", "metric", "metric_mean", "metric_std", "n_seeds"])?;
    for a in aggregates {
        w.write_record([
            a.policy.as_str().to_string(),
            a.cutoff.to_string(),
            a.model.name().to_string(),
            a.metric.name().to_string(),
            a.mean.to_string(),
            a.std.to_string(),
            a.n_seeds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_importances<W: Write>(out: W, records: &[ImportanceRecord]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["policy", "cutoff", "model", "rank", "feature", "weight"])?;
    for r in records {
        for (rank, (feature, weight)) in r.report.ranking.iter().enumerate() {
            w.write_record([
                r.policy.as_str().to_string(),
                r.report.cutoff.to_string(),
                r.report.model.name().to_string(),
                (rank + 1).to_string(),
                feature.clone(),
                weight.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_ablation<W: Write>(out: W, rows: &[AblationRow]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "cutoff",
        "model",
        "metric",
        "strict",
        "leaky_assessment",
        "leaky_all",
        "delta_leaky_assessment",
        "delta_leaky_all",
    ])?;
    for r in rows {
        w.write_record([
            r.cutoff.to_string(),
            r.model.name().to_string(),
            r.metric.name().to_string(),
            r.strict.to_string(),
            r.leaky_assessment.to_string(),
            r.leaky_all.to_string(),
            r.delta_assessment().to_string(),
            r.delta_all().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
