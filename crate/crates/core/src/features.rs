//! The early representation: ten named features per instance computed from
//! truncated, joined sources, and the cutoff datasets built from them.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Cohort, InstanceKey, InteractionRecord, SubmissionRecord};
use crate::guard::{
    audit, effective_cutoff, guarded_join, AssessmentMeta, AuditReport, GuardError, Joined, LeakagePolicy,
    ProvenanceLedger, SiteMeta, SourceKind, SourceView,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Interaction,
    Assessment,
}

pub const N_INTERACTION: usize = 7;
pub const N_ASSESSMENT: usize = 3;
pub const N_FEATURES: usize = N_INTERACTION + N_ASSESSMENT;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "total_clicks_t",
    "active_days_t",
    "unique_resources_t",
    "unique_activity_types_t",
    "daily_clicks_mean_t",
    "daily_clicks_std_t",
    "daily_clicks_max_t",
    "n_submissions_t",
    "mean_submission_delay_t",
    "avg_score_t",
];

pub fn feature_group(index: usize) -> FeatureGroup {
    if index < N_INTERACTION {
        FeatureGroup::Interaction
    } else {
        FeatureGroup::Assessment
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; N_FEATURES]);

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES.iter().position(|n| *n == name).map(|i| self.0[i])
    }

    pub fn values(&self) -> &[f64; N_FEATURES] {
        &self.0
    }
}

pub type InteractionRow<'a> = Joined<&'a InteractionRecord, SiteMeta>;
pub type SubmissionRow<'a> = Joined<&'a SubmissionRecord, AssessmentMeta>;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("feature part dimensions {interaction}+{assessment} do not match the fixed layout")]
    DimensionMismatch { interaction: usize, assessment: usize },
    #[error(transparent)]
    Guard(#[from] GuardError),
    #[error("strict audit failed at cutoff {}: {} violation(s)", .0.cutoff, .0.violations.len())]
    AuditFailed(Box<AuditReport>),
}

/// Interaction group for one instance from its truncated vle-joined rows.
///
/// Daily statistics are the mean, population standard deviation and maximum
/// of per-day click sums over active days. Every row read is recorded in the
/// ledger under [`FeatureGroup::Interaction`].
pub fn interaction_features(
    rows: &[InteractionRow<'_>],
    instance: usize,
    ledger: &mut ProvenanceLedger,
) -> [f64; N_INTERACTION] {
    if rows.is_empty() {
        return [0.0; N_INTERACTION];
    }
    let mut per_day: Vec<(i32, u64)> = Vec::with_capacity(rows.len());
    let mut sites: Vec<u32> = Vec::with_capacity(rows.len());
    let mut activities: Vec<u32> = Vec::with_capacity(rows.len());
    let mut total: u64 = 0;
    for row in rows {
        ledger.record_access(instance, FeatureGroup::Interaction, row.left.day);
        total += u64::from(row.left.clicks);
        per_day.push((row.left.day, u64::from(row.left.clicks)));
        sites.push(row.left.site);
        activities.push(row.right.activity);
    }
    per_day.sort_unstable();
    let mut daily: Vec<u64> = Vec::new();
    let mut last_day = None;
    for (day, clicks) in per_day {
        if last_day == Some(day) {
            *daily.last_mut().expect("non-empty") += clicks;
        } else {
            daily.push(clicks);
            last_day = Some(day);
        }
    }
    sites.sort_unstable();
    sites.dedup();
    activities.sort_unstable();
    activities.dedup();

    let active = daily.len() as f64;
    let mean = total as f64 / active;
    let var = daily.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / active;
    let max = daily.iter().copied().max().unwrap_or(0);
    [
        total as f64,
        active,
        sites.len() as f64,
        activities.len() as f64,
        mean,
        var.sqrt(),
        max as f64,
    ]
}

/// Assessment group for one instance from its truncated, due-date-joined
/// submissions.
///
/// Delay is `date_submitted - due` in days (negative means early), averaged
/// over rows with a due date. Scores are averaged over rows with a score;
/// a score counts as observable once its submission is.
pub fn assessment_features(
    rows: &[SubmissionRow<'_>],
    instance: usize,
    ledger: &mut ProvenanceLedger,
) -> [f64; N_ASSESSMENT] {
    let mut delay_sum: i64 = 0;
    let mut delay_n = 0usize;
    let mut score_sum = 0.0;
    let mut score_n = 0usize;
    for row in rows {
        ledger.record_access(instance, FeatureGroup::Assessment, row.left.day);
        if let Some(due) = row.right.due {
            delay_sum += i64::from(row.left.day) - i64::from(due);
            delay_n += 1;
        }
        if let Some(score) = row.left.score {
            score_sum += score;
            score_n += 1;
        }
    }
    let mean = |sum: f64, n: usize| if n == 0 { 0.0 } else { sum / n as f64 };
    [
        rows.len() as f64,
        mean(delay_sum as f64, delay_n),
        mean(score_sum, score_n),
    ]
}

/// Concatenates the two groups in the fixed feature order.
pub fn assemble(interaction: &[f64], assessment: &[f64]) -> Result<FeatureVector, FeatureError> {
    if interaction.len() != N_INTERACTION || assessment.len() != N_ASSESSMENT {
        return Err(FeatureError::DimensionMismatch {
            interaction: interaction.len(),
            assessment: assessment.len(),
        });
    }
    let mut out = [0.0; N_FEATURES];
    out[..N_INTERACTION].copy_from_slice(interaction);
    out[N_INTERACTION..].copy_from_slice(assessment);
    Ok(FeatureVector(out))
}

/// The labelled dataset for one cutoff and policy.
#[derive(Debug, Clone)]
pub struct CutoffDataset {
    pub cutoff: i32,
    pub policy: LeakagePolicy,
    pub keys: Vec<InstanceKey>,
    /// One row per instance in `keys` order, columns in [`FEATURE_NAMES`] order.
    pub features: Array2<f64>,
    pub labels: Vec<u8>,
    pub audit: AuditReport,
}

impl CutoffDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> FeatureVector {
        let mut v = [0.0; N_FEATURES];
        for (j, x) in self.features.row(i).iter().enumerate() {
            v[j] = *x;
        }
        FeatureVector(v)
    }

    /// CSV export sorted by instance key: key columns, features, label.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        write!(out, "code_module,code_presentation,id_student")?;
        for name in FEATURE_NAMES {
            write!(out, ",{name}")?;
        }
        writeln!(out, ",label")?;
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.keys[a].cmp(&self.keys[b]));
        for i in order {
            let k = &self.keys[i];
            write!(out, "{},{},{}", k.module, k.presentation, k.student)?;
            for x in self.features.row(i) {
                write!(out, ",{x}")?;
            }
            writeln!(out, ",{}", self.labels[i])?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_csv(&mut out)?;
        out.flush()
    }
}

/// The two timestamped sources of a cohort after applying a policy's
/// effective cutoffs.
#[derive(Debug, Clone)]
pub struct PipelineViews<'a> {
    pub interactions: SourceView<&'a InteractionRecord>,
    pub submissions: SourceView<&'a SubmissionRecord>,
}

/// Truncates every timestamped source of `cohort` to its effective cutoff.
/// This is the first step of every dataset build.
pub fn truncated_views(cohort: &Cohort, t: i32, policy: LeakagePolicy) -> PipelineViews<'_> {
    let interactions = SourceView::raw(SourceKind::Interaction, cohort.interactions().iter().collect())
        .restrict(effective_cutoff(policy, SourceKind::Interaction, t));
    let submissions = SourceView::raw(
        SourceKind::AssessmentSubmission,
        cohort.submissions().iter().collect(),
    )
    .restrict(effective_cutoff(policy, SourceKind::AssessmentSubmission, t));
    PipelineViews { interactions, submissions }
}

/// Builds the cutoff-`t` dataset for `policy`: truncation first, then joins,
/// then aggregation, then the audit.
pub fn build_cutoff_dataset(
    cohort: &Cohort,
    t: i32,
    policy: LeakagePolicy,
) -> Result<CutoffDataset, FeatureError> {
    build_from_views(cohort, truncated_views(cohort, t, policy), t, policy)
}

/// Joins and aggregates the given views. Exposed separately so callers can
/// supply their own views; the audit still checks whatever was read.
pub fn build_from_views(
    cohort: &Cohort,
    views: PipelineViews<'_>,
    t: i32,
    policy: LeakagePolicy,
) -> Result<CutoffDataset, FeatureError> {
    let sites = SourceView::metadata(
        cohort
            .site_activity()
            .iter()
            .map(|&(site, activity)| SiteMeta { site, activity })
            .collect(),
    );
    let due = SourceView::metadata(
        cohort
            .assessment_due()
            .iter()
            .map(|&(assessment, due)| AssessmentMeta { assessment, due })
            .collect(),
    );
    let interactions = guarded_join(&views.interactions, &sites, |r| r.site, |s| s.site, policy)?;
    let submissions = guarded_join(&views.submissions, &due, |r| r.assessment, |a| a.assessment, policy)?;

    let n = cohort.len();
    let interactions = bucket(interactions.into_records(), n, |r| r.left.instance);
    let submissions = bucket(submissions.into_records(), n, |r| r.left.instance);

    const CHUNK: usize = 2048;
    let shards: Vec<(Vec<FeatureVector>, ProvenanceLedger)> = (0..n)
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut ledger = ProvenanceLedger::new();
            let rows = chunk
                .iter()
                .map(|&i| {
                    let a = interaction_features(interactions.group(i), i, &mut ledger);
                    let b = assessment_features(submissions.group(i), i, &mut ledger);
                    assemble(&a, &b).expect("fixed layout")
                })
                .collect();
            (rows, ledger)
        })
        .collect();

    let mut ledger = ProvenanceLedger::new();
    let mut features = Array2::zeros((n, N_FEATURES));
    let mut row = 0;
    for (vectors, shard) in shards {
        ledger.merge(shard);
        for v in vectors {
            features.row_mut(row).iter_mut().zip(v.0).for_each(|(dst, x)| *dst = x);
            row += 1;
        }
    }

    let report = audit(&ledger, t, policy);
    if !report.passed() {
        return Err(FeatureError::AuditFailed(Box::new(report)));
    }
    if !report.violations.is_empty() {
        log::info!(
            "{policy} at t={t}: {} post-cutoff provenance entries (diagnostic)",
            report.violations.len()
        );
    }
    Ok(CutoffDataset {
        cutoff: t,
        policy,
        keys: cohort.keys(),
        features,
        labels: cohort.labels(),
        audit: report,
    })
}

struct Buckets<T> {
    items: Vec<T>,
    offsets: Vec<usize>,
}

impl<T> Buckets<T> {
    fn group(&self, i: usize) -> &[T] {
        &self.items[self.offsets[i]..self.offsets[i + 1]]
    }
}

/// Stable grouping by instance index. Rows are normally already grouped,
/// but injected views need not be.
fn bucket<T: Copy>(items: Vec<T>, n: usize, key: impl Fn(&T) -> usize) -> Buckets<T> {
    let mut offsets = vec![0usize; n + 1];
    for it in &items {
        offsets[key(it) + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    if items.windows(2).all(|w| key(&w[0]) <= key(&w[1])) {
        return Buckets { items, offsets };
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by_key(|&i| key(&items[i]));
    let items = order.into_iter().map(|i| items[i]).collect();
    Buckets { items, offsets }
}
