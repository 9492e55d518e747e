//! Cutoff-first truncation, joins over truncated views, provenance ledgers
//! and the audit that halts strict runs.
//!
//! Every timestamped source passes through [`SourceView::truncate`] (or
//! [`SourceView::restrict`] with the policy's effective cutoff) before it can
//! be joined or aggregated. Metadata tables carry no timestamp and live in
//! [`Bound::Static`] views. Feature code reports every record it reads to a
//! [`ProvenanceLedger`]; [`audit`] then checks each per-(instance, group)
//! maximum against the cutoff.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::Hash;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{InstanceKey, InteractionRecord, SubmissionRecord};
use crate::features::FeatureGroup;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SourceKind {
    Interaction,
    AssessmentSubmission,
    /// Untimed course-structure tables (vle, assessments).
    Metadata,
}

/// The admissibility bound attached to a view.
///
/// `Unbounded` is a sentinel, never encoded as a large day number, so no
/// comparison against a cutoff can accidentally succeed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bound {
    /// Every record has day <= the cutoff.
    Cutoff(i32),
    /// Raw, untruncated input.
    Unbounded,
    /// Metadata without timestamps; exempt from truncation.
    Static,
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Cutoff(t) => write!(f, "<= {t}"),
            Bound::Unbounded => f.write_str("unbounded"),
            Bound::Static => f.write_str("static"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LeakagePolicy {
    Strict,
    /// Assessment submissions are not truncated.
    LeakyAssessment,
    /// No source is truncated.
    LeakyAll,
}

impl LeakagePolicy {
    pub const ALL: [LeakagePolicy; 3] = [
        LeakagePolicy::Strict,
        LeakagePolicy::LeakyAssessment,
        LeakagePolicy::LeakyAll,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LeakagePolicy::Strict => "strict",
            LeakagePolicy::LeakyAssessment => "leaky-assessment",
            LeakagePolicy::LeakyAll => "leaky-all",
        }
    }
}

impl fmt::Display for LeakagePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LeakagePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(LeakagePolicy::Strict),
            "leaky-assessment" => Ok(LeakagePolicy::LeakyAssessment),
            "leaky-all" => Ok(LeakagePolicy::LeakyAll),
            other => Err(format!(
                "unknown policy `{other}` (expected strict, leaky-assessment or leaky-all)"
            )),
        }
    }
}

/// The bound a source of `kind` is truncated to at cutoff `t` under `policy`.
pub fn effective_cutoff(policy: LeakagePolicy, kind: SourceKind, t: i32) -> Bound {
    match (policy, kind) {
        (_, SourceKind::Metadata) => Bound::Static,
        (LeakagePolicy::Strict, _) => Bound::Cutoff(t),
        (LeakagePolicy::LeakyAssessment, SourceKind::Interaction) => Bound::Cutoff(t),
        (LeakagePolicy::LeakyAssessment, SourceKind::AssessmentSubmission) => Bound::Unbounded,
        (LeakagePolicy::LeakyAll, _) => Bound::Unbounded,
    }
}

/// A record with an optional timestamp. Metadata rows return `None`.
pub trait Timed {
    fn day(&self) -> Option<i32>;
}

impl<T: Timed + ?Sized> Timed for &T {
    fn day(&self) -> Option<i32> {
        (**self).day()
    }
}

impl Timed for InteractionRecord {
    fn day(&self) -> Option<i32> {
        Some(self.day)
    }
}

impl Timed for SubmissionRecord {
    fn day(&self) -> Option<i32> {
        Some(self.day)
    }
}

/// vle metadata: resource id and interned activity type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiteMeta {
    pub site: u32,
    pub activity: u32,
}

impl Timed for SiteMeta {
    fn day(&self) -> Option<i32> {
        None
    }
}

/// assessments metadata: due day, known in advance as course structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssessmentMeta {
    pub assessment: u32,
    pub due: Option<i32>,
}

impl Timed for AssessmentMeta {
    fn day(&self) -> Option<i32> {
        None
    }
}

/// A joined row. Its day is the later of the two sides' days; metadata sides
/// contribute none.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Joined<L, R> {
    pub left: L,
    pub right: R,
}

impl<L: Timed, R: Timed> Timed for Joined<L, R> {
    fn day(&self) -> Option<i32> {
        match (self.left.day(), self.right.day()) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GuardError {
    #[error("strict policy: {kind:?} view is unbounded; joins must use truncated sources")]
    UnboundedUnderStrict { kind: SourceKind },
    #[error("cutoff mismatch in join: {left} vs {right}")]
    CutoffMismatch { left: i32, right: i32 },
}

/// A multiset of records from one source together with its bound.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceView<R> {
    records: Vec<R>,
    bound: Bound,
    kind: SourceKind,
}

impl<R: Timed> SourceView<R> {
    /// Raw timestamped input.
    pub fn raw(kind: SourceKind, records: Vec<R>) -> Self {
        SourceView {
            records,
            bound: Bound::Unbounded,
            kind,
        }
    }

    pub fn metadata(records: Vec<R>) -> Self {
        SourceView {
            records,
            bound: Bound::Static,
            kind: SourceKind::Metadata,
        }
    }

    /// Builds a view with a declared bound without checking it. Used to
    /// inject faults when exercising the audit; nothing in the pipeline
    /// calls this.
    pub fn from_parts_unchecked(kind: SourceKind, records: Vec<R>, bound: Bound) -> Self {
        SourceView { records, bound, kind }
    }

    /// Keeps exactly the records with day <= t. Truncating an already
    /// truncated view keeps the tighter bound; metadata views are unchanged.
    pub fn truncate(self, t: i32) -> Self {
        if self.bound == Bound::Static {
            return self;
        }
        let bound = match self.bound {
            Bound::Cutoff(old) => Bound::Cutoff(old.min(t)),
            _ => Bound::Cutoff(t),
        };
        let records = self
            .records
            .into_iter()
            .filter(|r| r.day().is_none_or(|d| d <= t))
            .collect();
        SourceView {
            records,
            bound,
            kind: self.kind,
        }
    }

    /// Applies an effective cutoff: truncates for `Cutoff(t)` and leaves the
    /// view untouched otherwise.
    pub fn restrict(self, bound: Bound) -> Self {
        match bound {
            Bound::Cutoff(t) => self.truncate(t),
            Bound::Unbounded | Bound::Static => self,
        }
    }

    pub fn records(&self) -> &[R] {
        &self.records
    }

    pub fn into_records(self) -> Vec<R> {
        self.records
    }

    /// Appends a record without touching the bound; fault-injection only.
    pub fn push_unchecked(&mut self, record: R) {
        self.records.push(record);
    }

    pub fn bound(&self) -> Bound {
        self.bound
    }

    pub fn kind(&self) -> SourceKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Scans the records against the declared bound.
    pub fn is_consistent(&self) -> bool {
        match self.bound {
            Bound::Cutoff(t) => self.records.iter().all(|r| r.day().is_none_or(|d| d <= t)),
            Bound::Unbounded => true,
            Bound::Static => self.records.iter().all(|r| r.day().is_none()),
        }
    }
}

/// Inner equi-join of `left` and `right` on the given keys, preserving left
/// order (and right order within a key).
///
/// Under [`LeakagePolicy::Strict`] no input may be unbounded, and two
/// timestamped inputs must share their cutoff. Under the leaky policies an
/// unbounded input is allowed and makes the output unbounded.
pub fn guarded_join<L, R, K>(
    left: &SourceView<L>,
    right: &SourceView<R>,
    left_key: impl Fn(&L) -> K,
    right_key: impl Fn(&R) -> K,
    policy: LeakagePolicy,
) -> Result<SourceView<Joined<L, R>>, GuardError>
where
    L: Timed + Clone,
    R: Timed + Clone,
    K: Eq + Hash,
{
    if policy == LeakagePolicy::Strict {
        for view_kind in [(left.bound, left.kind), (right.bound, right.kind)] {
            if let (Bound::Unbounded, kind) = view_kind {
                return Err(GuardError::UnboundedUnderStrict { kind });
            }
        }
    }
    let bound = match (left.bound, right.bound) {
        (Bound::Cutoff(a), Bound::Cutoff(b)) if a != b => {
            return Err(GuardError::CutoffMismatch { left: a, right: b })
        }
        (Bound::Unbounded, _) | (_, Bound::Unbounded) => Bound::Unbounded,
        (Bound::Cutoff(t), _) | (_, Bound::Cutoff(t)) => Bound::Cutoff(t),
        (Bound::Static, Bound::Static) => Bound::Static,
    };
    let kind = if left.kind == SourceKind::Metadata { right.kind } else { left.kind };

    let mut index: HashMap<K, Vec<usize>> = HashMap::with_capacity(right.records.len());
    for (i, r) in right.records.iter().enumerate() {
        index.entry(right_key(r)).or_default().push(i);
    }
    let mut records = Vec::with_capacity(left.records.len());
    for l in &left.records {
        if let Some(matches) = index.get(&left_key(l)) {
            for &i in matches {
                records.push(Joined {
                    left: l.clone(),
                    right: right.records[i].clone(),
                });
            }
        }
    }
    Ok(SourceView { records, bound, kind })
}

/// Per (instance, feature group) maximum day of any record read while
/// computing that group, for one run at one cutoff.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProvenanceLedger {
    entries: BTreeMap<(usize, FeatureGroup), i32>,
}

impl ProvenanceLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_access(&mut self, instance: usize, group: FeatureGroup, day: i32) {
        self.entries
            .entry((instance, group))
            .and_modify(|m| *m = (*m).max(day))
            .or_insert(day);
    }

    pub fn get(&self, instance: usize, group: FeatureGroup) -> Option<i32> {
        self.entries.get(&(instance, group)).copied()
    }

    /// Entrywise max; used to combine per-worker shards.
    pub fn merge(&mut self, other: ProvenanceLedger) {
        for ((instance, group), day) in other.entries {
            self.record_access(instance, group, day);
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, FeatureGroup, i32)> + '_ {
        self.entries.iter().map(|(&(i, g), &d)| (i, g, d))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    /// Leaky policies: violations were found and reported, run continues.
    PassWithDiagnostics,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub instance: usize,
    pub group: FeatureGroup,
    pub day: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub cutoff: i32,
    pub policy: LeakagePolicy,
    pub group_max: BTreeMap<FeatureGroup, i32>,
    pub violations: Vec<Violation>,
    pub verdict: Verdict,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }

    /// One JSON object per violation followed by a summary object.
    pub fn write_jsonl<W: Write>(&self, out: &mut W, keys: &[InstanceKey]) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct ViolationLine<'a> {
            record: &'static str,
            policy: LeakagePolicy,
            cutoff: i32,
            module: &'a str,
            presentation: &'a str,
            student: u32,
            group: FeatureGroup,
            provenance_day: i32,
        }
        #[derive(Serialize)]
        struct SummaryLine<'a> {
            record: &'static str,
            policy: LeakagePolicy,
            cutoff: i32,
            group_max: &'a BTreeMap<FeatureGroup, i32>,
            violations: usize,
            verdict: Verdict,
        }
        for v in &self.violations {
            let key = &keys[v.instance];
            let line = ViolationLine {
                record: "violation",
                policy: self.policy,
                cutoff: self.cutoff,
                module: &key.module,
                presentation: &key.presentation,
                student: key.student,
                group: v.group,
                provenance_day: v.day,
            };
            serde_json::to_writer(&mut *out, &line)?;
            out.write_all(b"\n")?;
        }
        let summary = SummaryLine {
            record: "summary",
            policy: self.policy,
            cutoff: self.cutoff,
            group_max: &self.group_max,
            violations: self.violations.len(),
            verdict: self.verdict,
        };
        serde_json::to_writer(&mut *out, &summary)?;
        out.write_all(b"\n")
    }
}

/// Checks every ledger entry against `t`. Under Strict any entry beyond `t`
/// fails the audit and the caller must abort; leaky policies report the
/// same violations as diagnostics.
pub fn audit(ledger: &ProvenanceLedger, t: i32, policy: LeakagePolicy) -> AuditReport {
    let mut group_max: BTreeMap<FeatureGroup, i32> = BTreeMap::new();
    let mut violations = Vec::new();
    for (instance, group, day) in ledger.iter() {
        group_max
            .entry(group)
            .and_modify(|m| *m = (*m).max(day))
            .or_insert(day);
        if day > t {
            violations.push(Violation { instance, group, day });
        }
    }
    let verdict = match (violations.is_empty(), policy) {
        (true, _) => Verdict::Pass,
        (false, LeakagePolicy::Strict) => Verdict::Fail,
        (false, _) => Verdict::PassWithDiagnostics,
    };
    AuditReport {
        cutoff: t,
        policy,
        group_max,
        violations,
        verdict,
    }
}
