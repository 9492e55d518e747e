//! OULAD-schema ingestion, outcome labels, cohort assembly and a synthetic
//! generator producing tables in the same schema.

mod cohort;
mod synth;
pub mod tables;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cohort::{build_cohort, Cohort, CohortSummary, Instance, InteractionRecord, SubmissionRecord};
pub use synth::{generate_synthetic, SynthConfig};
pub use tables::{load_tables, write_tables, IngestReport, RawTables};

/// One learner in one course run.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InstanceKey {
    pub module: String,
    pub presentation: String,
    pub student: u32,
}

impl fmt::Display for InstanceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.module, self.presentation, self.student)
    }
}

/// Binary end-of-course outcome: 1 for Pass/Distinction, 0 for Fail/Withdrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Label(u8);

impl Label {
    pub const SUCCESS: Label = Label(1);
    pub const AT_RISK: Label = Label(0);

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn is_positive(self) -> bool {
        self.0 == 1
    }
}

/// Maps a stored `final_result` string to its label. The comparison is
/// case-sensitive; anything outside the four stored values is rejected.
pub fn derive_label(final_result: &str) -> Result<Label, DatasetError> {
    match final_result {
        "Pass" | "Distinction" => Ok(Label::SUCCESS),
        "Fail" | "Withdrawn" => Ok(Label::AT_RISK),
        other => Err(DatasetError::UnknownOutcome(other.to_string())),
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("missing input file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{file}: line {line}: {message}")]
    MalformedRow {
        file: String,
        line: u64,
        message: String,
    },
    #[error("{file}: missing column `{column}`")]
    MissingColumn { file: String, column: String },
    #[error("unknown final_result value `{0}`")]
    UnknownOutcome(String),
    #[error("duplicate studentInfo row for instance {0}")]
    DuplicateInstance(InstanceKey),
    #[error("invalid synthetic config: {0}")]
    InvalidSynthConfig(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_mapping_is_total_over_stored_outcomes() {
        assert_eq!(derive_label("Pass").unwrap().value(), 1);
        assert_eq!(derive_label("Distinction").unwrap().value(), 1);
        assert_eq!(derive_label("Fail").unwrap().value(), 0);
        assert_eq!(derive_label("Withdrawn").unwrap().value(), 0);
    }

    #[test]
    fn label_mapping_is_case_sensitive() {
        match derive_label("pass") {
            Err(DatasetError::UnknownOutcome(v)) => assert_eq!(v, "pass"),
            other => panic!("expected unknown-outcome error, got {other:?}"),
        }
        assert!(derive_label("").is_err());
        assert!(derive_label("Pass ").is_err());
    }
}
