//! Reading and writing the five OULAD CSV tables.
//!
//! Columns are located by header name, so extra columns present in the real
//! distribution (demographics, weights, week ranges) are ignored. Absent
//! values are written as `?`; on input both `?` and the empty string are
//! treated as absent.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use super::DatasetError;

/// Index into [`RunTable`]; one per (code_module, code_presentation).
pub type RunId = u16;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CourseRun {
    pub module: String,
    pub presentation: String,
}

/// Interned course runs, numbered by first appearance.
#[derive(Debug, Clone, Default)]
pub struct RunTable {
    runs: Vec<CourseRun>,
    index: HashMap<CourseRun, RunId>,
}

impl PartialEq for RunTable {
    fn eq(&self, other: &Self) -> bool {
        self.runs == other.runs
    }
}

impl RunTable {
    pub fn intern(&mut self, module: &str, presentation: &str) -> Result<RunId, String> {
        let run = CourseRun {
            module: module.to_string(),
            presentation: presentation.to_string(),
        };
        if let Some(&id) = self.index.get(&run) {
            return Ok(id);
        }
        let id = RunId::try_from(self.runs.len()).map_err(|_| "too many course runs".to_string())?;
        self.runs.push(run.clone());
        self.index.insert(run, id);
        Ok(id)
    }

    pub fn get(&self, id: RunId) -> &CourseRun {
        &self.runs[id as usize]
    }

    pub fn lookup(&self, module: &str, presentation: &str) -> Option<RunId> {
        self.index
            .get(&CourseRun {
                module: module.to_string(),
                presentation: presentation.to_string(),
            })
            .copied()
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudentInfoRow {
    pub run: RunId,
    pub student: u32,
    pub final_result: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentVleRow {
    pub run: RunId,
    pub student: u32,
    pub site: u32,
    pub date: i32,
    pub sum_click: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VleRow {
    pub site: u32,
    pub run: RunId,
    pub activity_type: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssessmentRow {
    pub assessment: u32,
    pub run: RunId,
    /// Due day; absent for some final exams.
    pub date: Option<i32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentAssessmentRow {
    pub assessment: u32,
    pub student: u32,
    /// Absent for banked/transferred results.
    pub date_submitted: Option<i32>,
    pub is_banked: bool,
    pub score: Option<f64>,
}

/// The five source tables as stored, before any cohort-level filtering.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawTables {
    pub runs: RunTable,
    pub student_info: Vec<StudentInfoRow>,
    pub student_vle: Vec<StudentVleRow>,
    pub vle: Vec<VleRow>,
    pub assessments: Vec<AssessmentRow>,
    pub student_assessment: Vec<StudentAssessmentRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    StudentInfo,
    Vle,
    Assessments,
    StudentVle,
    StudentAssessment,
}

impl TableKind {
    /// Load order. Metadata tables come before the event tables that
    /// reference them, and studentInfo first so run ids follow its order.
    pub const ALL: [TableKind; 5] = [
        TableKind::StudentInfo,
        TableKind::Vle,
        TableKind::Assessments,
        TableKind::StudentVle,
        TableKind::StudentAssessment,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            TableKind::StudentInfo => "studentInfo.csv",
            TableKind::Vle => "vle.csv",
            TableKind::Assessments => "assessments.csv",
            TableKind::StudentVle => "studentVle.csv",
            TableKind::StudentAssessment => "studentAssessment.csv",
        }
    }
}

/// Row counts and join diagnostics for a set of loaded tables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub student_info_rows: usize,
    pub student_vle_rows: usize,
    pub vle_rows: usize,
    pub assessment_rows: usize,
    pub student_assessment_rows: usize,
    /// studentVle rows whose id_site has no vle row.
    pub unresolved_sites: usize,
    /// studentAssessment rows whose id_assessment has no assessments row.
    pub unresolved_assessments: usize,
    /// Extra rows beyond the first for a repeated (assessment, student) pair.
    pub duplicate_submissions: usize,
    /// studentAssessment rows without date_submitted.
    pub undated_submissions: usize,
    pub banked_submissions: usize,
    pub missing_scores: usize,
    pub assessments_without_due_date: usize,
}

impl RawTables {
    pub fn ingest_report(&self) -> IngestReport {
        let sites: HashSet<u32> = self.vle.iter().map(|v| v.site).collect();
        let assessments: HashSet<u32> = self.assessments.iter().map(|a| a.assessment).collect();
        let mut seen = HashSet::new();
        let mut duplicate_submissions = 0;
        for row in &self.student_assessment {
            if !seen.insert((row.assessment, row.student)) {
                duplicate_submissions += 1;
            }
        }
        IngestReport {
            student_info_rows: self.student_info.len(),
            student_vle_rows: self.student_vle.len(),
            vle_rows: self.vle.len(),
            assessment_rows: self.assessments.len(),
            student_assessment_rows: self.student_assessment.len(),
            unresolved_sites: self
                .student_vle
                .iter()
                .filter(|r| !sites.contains(&r.site))
                .count(),
            unresolved_assessments: self
                .student_assessment
                .iter()
                .filter(|r| !assessments.contains(&r.assessment))
                .count(),
            duplicate_submissions,
            undated_submissions: self
                .student_assessment
                .iter()
                .filter(|r| r.date_submitted.is_none())
                .count(),
            banked_submissions: self.student_assessment.iter().filter(|r| r.is_banked).count(),
            missing_scores: self
                .student_assessment
                .iter()
                .filter(|r| r.score.is_none())
                .count(),
            assessments_without_due_date: self
                .assessments
                .iter()
                .filter(|a| a.date.is_none())
                .count(),
        }
    }
}

/// Loads the five tables from `root`. All files are checked for existence
/// before any parsing starts.
pub fn load_tables(root: impl AsRef<Path>) -> Result<RawTables, DatasetError> {
    let root = root.as_ref();
    for kind in TableKind::ALL {
        let path = root.join(kind.file_name());
        if !path.is_file() {
            return Err(DatasetError::MissingFile(path));
        }
    }
    let mut tables = RawTables::default();
    for kind in TableKind::ALL {
        let path = root.join(kind.file_name());
        let file = File::open(&path).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        read_table_into(&mut tables, kind, BufReader::with_capacity(1 << 20, file))?;
        log::debug!("loaded {}", kind.file_name());
    }
    Ok(tables)
}

/// Parses one table from `reader` and appends its rows to `tables`.
pub fn read_table_into<R: Read>(
    tables: &mut RawTables,
    kind: TableKind,
    reader: R,
) -> Result<(), DatasetError> {
    let file = kind.file_name();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(file, e))?.clone();
    let col = |name: &str| -> Result<usize, DatasetError> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| DatasetError::MissingColumn {
                file: file.to_string(),
                column: name.to_string(),
            })
    };

    let mut record = csv::StringRecord::new();
    match kind {
        TableKind::StudentInfo => {
            let (m, p, s, r) = (
                col("code_module")?,
                col("code_presentation")?,
                col("id_student")?,
                col("final_result")?,
            );
            while next(&mut rdr, &mut record, file)? {
                let line = line_of(&record);
                let run = tables
                    .runs
                    .intern(field(&record, m), field(&record, p))
                    .map_err(|msg| malformed(file, line, msg))?;
                tables.student_info.push(StudentInfoRow {
                    run,
                    student: parse_num(&record, s, "id_student", file)?,
                    final_result: field(&record, r).to_string(),
                });
            }
        }
        TableKind::Vle => {
            let (site, m, p, a) = (
                col("id_site")?,
                col("code_module")?,
                col("code_presentation")?,
                col("activity_type")?,
            );
            while next(&mut rdr, &mut record, file)? {
                let line = line_of(&record);
                let run = tables
                    .runs
                    .intern(field(&record, m), field(&record, p))
                    .map_err(|msg| malformed(file, line, msg))?;
                tables.vle.push(VleRow {
                    site: parse_num(&record, site, "id_site", file)?,
                    run,
                    activity_type: field(&record, a).to_string(),
                });
            }
        }
        TableKind::Assessments => {
            let (id, m, p, d) = (
                col("id_assessment")?,
                col("code_module")?,
                col("code_presentation")?,
                col("date")?,
            );
            while next(&mut rdr, &mut record, file)? {
                let line = line_of(&record);
                let run = tables
                    .runs
                    .intern(field(&record, m), field(&record, p))
                    .map_err(|msg| malformed(file, line, msg))?;
                tables.assessments.push(AssessmentRow {
                    assessment: parse_num(&record, id, "id_assessment", file)?,
                    run,
                    date: parse_opt_num(&record, d, "date", file)?,
                });
            }
        }
        TableKind::StudentVle => {
            let (m, p, s, site, d, c) = (
                col("code_module")?,
                col("code_presentation")?,
                col("id_student")?,
                col("id_site")?,
                col("date")?,
                col("sum_click")?,
            );
            while next(&mut rdr, &mut record, file)? {
                let line = line_of(&record);
                let run = tables
                    .runs
                    .intern(field(&record, m), field(&record, p))
                    .map_err(|msg| malformed(file, line, msg))?;
                tables.student_vle.push(StudentVleRow {
                    run,
                    student: parse_num(&record, s, "id_student", file)?,
                    site: parse_num(&record, site, "id_site", file)?,
                    date: parse_num(&record, d, "date", file)?,
                    sum_click: parse_num(&record, c, "sum_click", file)?,
                });
            }
        }
        TableKind::StudentAssessment => {
            let (id, s, d, sc) = (
                col("id_assessment")?,
                col("id_student")?,
                col("date_submitted")?,
                col("score")?,
            );
            // Optional in hand-made fixtures.
            let banked = headers.iter().position(|h| h.trim() == "is_banked");
            while next(&mut rdr, &mut record, file)? {
                let line = line_of(&record);
                let is_banked = match banked {
                    Some(b) => match field(&record, b) {
                        "1" => true,
                        "0" | "" | "?" => false,
                        other => {
                            return Err(malformed(file, line, format!("is_banked: invalid value `{other}`")))
                        }
                    },
                    None => false,
                };
                let score: Option<f64> = parse_opt_num(&record, sc, "score", file)?;
                if let Some(v) = score {
                    if !(0.0..=100.0).contains(&v) {
                        return Err(malformed(file, line, format!("score {v} outside 0-100")));
                    }
                }
                tables.student_assessment.push(StudentAssessmentRow {
                    assessment: parse_num(&record, id, "id_assessment", file)?,
                    student: parse_num(&record, s, "id_student", file)?,
                    date_submitted: parse_opt_num(&record, d, "date_submitted", file)?,
                    is_banked,
                    score,
                });
            }
        }
    }
    Ok(())
}

/// Writes the five tables into `dir` in the format [`load_tables`] reads.
pub fn write_tables(tables: &RawTables, dir: impl AsRef<Path>) -> Result<(), DatasetError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|source| DatasetError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    for kind in TableKind::ALL {
        let path = dir.join(kind.file_name());
        let io_err = |source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = File::create(&path).map_err(io_err)?;
        let mut out = BufWriter::new(file);
        write_table(tables, kind, &mut out).map_err(io_err)?;
        out.flush().map_err(io_err)?;
    }
    Ok(())
}

fn write_table<W: Write>(tables: &RawTables, kind: TableKind, out: &mut W) -> std::io::Result<()> {
    let run = |id: RunId| tables.runs.get(id);
    match kind {
        TableKind::StudentInfo => {
            writeln!(out, "code_module,code_presentation,id_student,final_result")?;
            for r in &tables.student_info {
                let c = run(r.run);
                writeln!(out, "{},{},{},{}", c.module, c.presentation, r.student, r.final_result)?;
            }
        }
        TableKind::Vle => {
            writeln!(out, "id_site,code_module,code_presentation,activity_type")?;
            for r in &tables.vle {
                let c = run(r.run);
                writeln!(out, "{},{},{},{}", r.site, c.module, c.presentation, r.activity_type)?;
            }
        }
        TableKind::Assessments => {
            writeln!(out, "code_module,code_presentation,id_assessment,date")?;
            for r in &tables.assessments {
                let c = run(r.run);
                writeln!(out, "{},{},{},{}", c.module, c.presentation, r.assessment, opt(r.date))?;
            }
        }
        TableKind::StudentVle => {
            writeln!(out, "code_module,code_presentation,id_student,id_site,date,sum_click")?;
            for r in &tables.student_vle {
                let c = run(r.run);
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    c.module, c.presentation, r.student, r.site, r.date, r.sum_click
                )?;
            }
        }
        TableKind::StudentAssessment => {
            writeln!(out, "id_assessment,id_student,date_submitted,is_banked,score")?;
            for r in &tables.student_assessment {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    r.assessment,
                    r.student,
                    opt(r.date_submitted),
                    u8::from(r.is_banked),
                    opt(r.score)
                )?;
            }
        }
    }
    Ok(())
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "?".to_string(), |v| v.to_string())
}

fn next<R: Read>(
    rdr: &mut csv::Reader<R>,
    record: &mut csv::StringRecord,
    file: &str,
) -> Result<bool, DatasetError> {
    rdr.read_record(record).map_err(|e| csv_error(file, e))
}

fn csv_error(file: &str, e: csv::Error) -> DatasetError {
    let line = e.position().map_or(0, |p| p.line());
    let message = match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("expected {expected_len} columns, found {len}")
        }
        _ => e.to_string(),
    };
    malformed(file, line, message)
}

fn malformed(file: &str, line: u64, message: impl Into<String>) -> DatasetError {
    DatasetError::MalformedRow {
        file: file.to_string(),
        line,
        message: message.into(),
    }
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn field(record: &csv::StringRecord, idx: usize) -> &str {
    record.get(idx).unwrap_or("").trim()
}

fn parse_num<T: std::str::FromStr>(
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
    file: &str,
) -> Result<T, DatasetError> {
    let raw = field(record, idx);
    raw.parse()
        .map_err(|_| malformed(file, line_of(record), format!("{name}: invalid value `{raw}`")))
}

fn parse_opt_num<T: std::str::FromStr + IsFinite>(
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
    file: &str,
) -> Result<Option<T>, DatasetError> {
    let raw = field(record, idx);
    if raw.is_empty() || raw == "?" {
        return Ok(None);
    }
    match raw.parse::<T>() {
        Ok(v) if v.is_finite_value() => Ok(Some(v)),
        _ => Err(malformed(file, line_of(record), format!("{name}: invalid value `{raw}`"))),
    }
}

trait IsFinite {
    fn is_finite_value(&self) -> bool;
}

impl IsFinite for i32 {
    fn is_finite_value(&self) -> bool {
        true
    }
}

impl IsFinite for f64 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}
