use std::collections::{HashMap, HashSet};

use serde::Serialize;

use super::tables::{RawTables, RunId};
use super::{derive_label, DatasetError, InstanceKey, Label};

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub key: InstanceKey,
    pub label: Label,
}

/// A studentVle row attached to its instance. `day` is studentVle.date.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionRecord {
    pub instance: usize,
    pub site: u32,
    pub day: i32,
    pub clicks: u32,
}

/// A dated studentAssessment row attached to its instance. `day` is
/// date_submitted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubmissionRecord {
    pub instance: usize,
    pub assessment: u32,
    pub day: i32,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortSummary {
    pub instances: usize,
    pub runs: usize,
    pub positives: usize,
    pub positive_fraction: f64,
    pub interaction_records: usize,
    pub submission_records: usize,
    /// studentVle rows whose instance is not in studentInfo.
    pub dropped_interactions: usize,
    /// studentAssessment rows whose instance is not in studentInfo, or whose
    /// assessment is unknown (the course run cannot be resolved without it).
    pub dropped_submissions: usize,
    /// Banked/transferred rows without date_submitted.
    pub undated_submissions: usize,
}

/// The prediction instances with their labels and raw record streams.
///
/// Instances are sorted by (module, presentation, student). Record streams
/// are stored contiguously per instance in source-file order.
#[derive(Debug, Clone)]
pub struct Cohort {
    instances: Vec<Instance>,
    interactions: Vec<InteractionRecord>,
    interaction_offsets: Vec<usize>,
    submissions: Vec<SubmissionRecord>,
    submission_offsets: Vec<usize>,
    activity_types: Vec<String>,
    site_activity: Vec<(u32, u32)>,
    assessment_due: Vec<(u32, Option<i32>)>,
    summary: CohortSummary,
}

impl Cohort {
    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn keys(&self) -> Vec<InstanceKey> {
        self.instances.iter().map(|i| i.key.clone()).collect()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.instances.iter().map(|i| i.label.value()).collect()
    }

    /// All interaction records, grouped by instance.
    pub fn interactions(&self) -> &[InteractionRecord] {
        &self.interactions
    }

    pub fn interactions_of(&self, instance: usize) -> &[InteractionRecord] {
        &self.interactions[self.interaction_offsets[instance]..self.interaction_offsets[instance + 1]]
    }

    /// All dated submission records, grouped by instance.
    pub fn submissions(&self) -> &[SubmissionRecord] {
        &self.submissions
    }

    pub fn submissions_of(&self, instance: usize) -> &[SubmissionRecord] {
        &self.submissions[self.submission_offsets[instance]..self.submission_offsets[instance + 1]]
    }

    /// vle metadata as (id_site, activity type index), sorted by site.
    pub fn site_activity(&self) -> &[(u32, u32)] {
        &self.site_activity
    }

    pub fn activity_type_name(&self, idx: u32) -> &str {
        &self.activity_types[idx as usize]
    }

    /// Assessment metadata as (id_assessment, due day), sorted by id.
    pub fn assessment_due(&self) -> &[(u32, Option<i32>)] {
        &self.assessment_due
    }

    pub fn summary(&self) -> &CohortSummary {
        &self.summary
    }
}

/// Builds the cohort: one instance per studentInfo row, with interaction and
/// submission streams attached by instance key.
pub fn build_cohort(tables: &RawTables) -> Result<Cohort, DatasetError> {
    let mut order: Vec<usize> = (0..tables.student_info.len()).collect();
    let key_of = |row: usize| {
        let r = &tables.student_info[row];
        let run = tables.runs.get(r.run);
        (run.module.as_str(), run.presentation.as_str(), r.student)
    };
    order.sort_by(|&a, &b| key_of(a).cmp(&key_of(b)));

    let mut instances = Vec::with_capacity(order.len());
    let mut index: HashMap<(RunId, u32), usize> = HashMap::with_capacity(order.len());
    for &row in &order {
        let r = &tables.student_info[row];
        let run = tables.runs.get(r.run);
        let key = InstanceKey {
            module: run.module.clone(),
            presentation: run.presentation.clone(),
            student: r.student,
        };
        if index.insert((r.run, r.student), instances.len()).is_some() {
            return Err(DatasetError::DuplicateInstance(key));
        }
        let label = derive_label(&r.final_result)?;
        instances.push(Instance { key, label });
    }
    let n = instances.len();

    let mut dropped_interactions = 0;
    let mut interactions = Vec::with_capacity(tables.student_vle.len());
    for r in &tables.student_vle {
        match index.get(&(r.run, r.student)) {
            Some(&instance) => interactions.push(InteractionRecord {
                instance,
                site: r.site,
                day: r.date,
                clicks: r.sum_click,
            }),
            None => dropped_interactions += 1,
        }
    }
    let (interactions, interaction_offsets) = group_by_instance(interactions, n, |r| r.instance);

    let assessment_run: HashMap<u32, RunId> =
        tables.assessments.iter().map(|a| (a.assessment, a.run)).collect();
    let mut dropped_submissions = 0;
    let mut undated_submissions = 0;
    let mut submissions = Vec::with_capacity(tables.student_assessment.len());
    for r in &tables.student_assessment {
        let instance = assessment_run
            .get(&r.assessment)
            .and_then(|run| index.get(&(*run, r.student)));
        match (instance, r.date_submitted) {
            (None, _) => dropped_submissions += 1,
            (Some(_), None) => undated_submissions += 1,
            (Some(&instance), Some(day)) => submissions.push(SubmissionRecord {
                instance,
                assessment: r.assessment,
                day,
                score: r.score,
            }),
        }
    }
    let (submissions, submission_offsets) = group_by_instance(submissions, n, |r| r.instance);

    let mut activity_types: Vec<String> = Vec::new();
    let mut activity_index: HashMap<&str, u32> = HashMap::new();
    let mut site_activity = Vec::with_capacity(tables.vle.len());
    let mut seen_sites = HashSet::new();
    for v in &tables.vle {
        let idx = *activity_index.entry(v.activity_type.as_str()).or_insert_with(|| {
            activity_types.push(v.activity_type.clone());
            (activity_types.len() - 1) as u32
        });
        // id_site is unique in OULAD; keep the first row if not.
        if seen_sites.insert(v.site) {
            site_activity.push((v.site, idx));
        }
    }
    site_activity.sort_unstable();

    let mut seen_assessments = HashSet::new();
    let mut assessment_due: Vec<(u32, Option<i32>)> = tables
        .assessments
        .iter()
        .filter(|a| seen_assessments.insert(a.assessment))
        .map(|a| (a.assessment, a.date))
        .collect();
    assessment_due.sort_unstable();

    let positives = instances.iter().filter(|i| i.label.is_positive()).count();
    let runs: HashSet<(&str, &str)> = instances
        .iter()
        .map(|i| (i.key.module.as_str(), i.key.presentation.as_str()))
        .collect();
    let summary = CohortSummary {
        instances: n,
        runs: runs.len(),
        positives,
        positive_fraction: if n == 0 { 0.0 } else { positives as f64 / n as f64 },
        interaction_records: interactions.len(),
        submission_records: submissions.len(),
        dropped_interactions,
        dropped_submissions,
        undated_submissions,
    };

    Ok(Cohort {
        instances,
        interactions,
        interaction_offsets,
        submissions,
        submission_offsets,
        activity_types,
        site_activity,
        assessment_due,
        summary,
    })
}

/// Stable counting sort by instance; returns the records and CSR offsets.
fn group_by_instance<T: Copy>(records: Vec<T>, n: usize, instance: impl Fn(&T) -> usize) -> (Vec<T>, Vec<usize>) {
    let mut offsets = vec![0usize; n + 1];
    for r in &records {
        offsets[instance(r) + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor = offsets.clone();
    let mut out: Vec<Option<T>> = vec![None; records.len()];
    for r in records {
        let slot = &mut cursor[instance(&r)];
        out[*slot] = Some(r);
        *slot += 1;
    }
    (out.into_iter().map(|r| r.expect("every slot filled")).collect(), offsets)
}
