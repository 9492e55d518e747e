//! `leap` command-line driver.
//!
//! Exit codes: 0 ok, 1 I/O failure, 2 configuration error, 3 data error,
//! 4 protocol violation (strict audit failure), 5 undefined metric.

pub mod config;

use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use leap_core::dataset::tables::TableKind;
use leap_core::dataset::{write_tables, CohortSummary, IngestReport};
use leap_core::eval::{
    ablation, aggregate, read_results, run_benchmark, write_ablation, write_aggregates, write_importances,
    write_results, AggregateResult, BenchmarkPlan, DatasetBuilder, EvalError, LeapBuilder, Metric,
};
use leap_core::features::FeatureError;
use leap_core::guard::AuditReport;
use leap_core::{build_cohort, generate_synthetic, load_tables, Cohort, DatasetError, ModelKind};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use config::{load_config, parse_cutoffs, parse_models, parse_policy, parse_seeds, BenchmarkConfig, ConfigError, DataSource};

pub const RESULTS_FILE: &str = "results.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const IMPORTANCE_FILE: &str = "importance.csv";
pub const AUDIT_FILE: &str = "audit.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const ABLATION_FILE: &str = "ablation.csv";
pub const ABLATION_LONG_FILE: &str = "ablation_long.csv";

/// Result files a halted strict run must not leave behind.
const RESULT_FILES: [&str; 6] = [
    RESULTS_FILE,
    AGGREGATE_FILE,
    IMPORTANCE_FILE,
    MANIFEST_FILE,
    ABLATION_FILE,
    ABLATION_LONG_FILE,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Ok = 0,
    Failure = 1,
    Config = 2,
    Data = 3,
    Protocol = 4,
    MetricUndefined = 5,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DatasetError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn status(&self) -> ExitStatus {
        match self {
            CliError::Config(_) => ExitStatus::Config,
            CliError::Data(DatasetError::InvalidSynthConfig(_)) => ExitStatus::Config,
            CliError::Data(_) => ExitStatus::Data,
            CliError::Eval(e) if e.is_protocol_violation() => ExitStatus::Protocol,
            CliError::Eval(e) if e.is_metric_undefined() => ExitStatus::MetricUndefined,
            CliError::Eval(EvalError::Plan(_)) => ExitStatus::Config,
            CliError::Eval(EvalError::Split { .. } | EvalError::Parse { .. } | EvalError::MissingSeeds(_)) => {
                ExitStatus::Data
            }
            CliError::Eval(EvalError::Csv(_)) => ExitStatus::Data,
            CliError::Eval(_) | CliError::Io { .. } => ExitStatus::Failure,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "leap", version, about = "Leakage-controlled early outcome prediction benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load the tables and print row, instance and label counts.
    Validate(RunArgs),
    /// Run the benchmark grid for one policy.
    Run(RunArgs),
    /// Compare the strict policy with both leaky variants.
    Ablate(RunArgs),
    /// Write synthetic OULAD-schema tables.
    Synth(SynthArgs),
    /// Re-aggregate an existing results file.
    Report(ReportArgs),
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data_root: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long)]
    pub cutoffs: Option<String>,
    #[arg(long)]
    pub models: Option<String>,
    #[arg(long)]
    pub seeds: Option<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Fill the wall_seconds column (results are then no longer reproducible byte for byte).
    #[arg(long)]
    pub record_timings: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Synthetic generator config (bare keys); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Override the generator seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub results: PathBuf,
    /// Seed set every cell must carry.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Directory for aggregate.csv; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Config file first, then flags on top.
pub fn resolve_config(args: &RunArgs) -> Result<BenchmarkConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => BenchmarkConfig::default(),
    };
    if let Some(root) = &args.data_root {
        cfg.source = Some(DataSource::Oulad(root.clone()));
    }
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    if let Some(p) = &args.policy {
        cfg.policy = parse_policy(p)?;
    }
    if let Some(c) = &args.cutoffs {
        cfg.cutoffs = parse_cutoffs(c)?;
    }
    if let Some(m) = &args.models {
        cfg.models = Some(parse_models(m)?);
    }
    if let Some(s) = &args.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    if let Some(j) = args.jobs {
        cfg.jobs = j;
    }
    cfg.record_timings |= args.record_timings;
    if cfg.source.is_none() {
        return Err(ConfigError::NoSource.into());
    }
    Ok(cfg)
}

pub struct LoadedData {
    pub cohort: Cohort,
    pub ingest: IngestReport,
    /// File name and sha256 of every input table, for OULAD sources.
    pub input_hashes: Vec<(String, String)>,
}

pub fn load_source(source: &DataSource) -> Result<LoadedData, CliError> {
    let (tables, input_hashes) = match source {
        DataSource::Oulad(root) => {
            let tables = load_tables(root)?;
            let mut hashes = Vec::new();
            for kind in TableKind::ALL {
                let path = root.join(kind.file_name());
                hashes.push((kind.file_name().to_string(), sha256_file(&path)?));
            }
            (tables, hashes)
        }
        DataSource::Synthetic(cfg) => (generate_synthetic(cfg)?, Vec::new()),
    };
    let ingest = tables.ingest_report();
    let cohort = build_cohort(&tables)?;
    Ok(LoadedData {
        cohort,
        ingest,
        input_hashes,
    })
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let mut f = File::open(path).map_err(io_err(path))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(io_err(path))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub ingest: IngestReport,
    pub summary: CohortSummary,
}

pub fn cmd_validate(cfg: &BenchmarkConfig, out: &mut dyn Write) -> Result<ValidationReport, CliError> {
    let data = load_source(cfg.source.as_ref().ok_or(ConfigError::NoSource)?)?;
    let ingest = data.ingest;
    let summary = data.cohort.summary().clone();
    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(io_err(Path::new("<stdout>")));
    w(out, format!("studentInfo rows        {}", ingest.student_info_rows))?;
    w(out, format!("studentVle rows         {}", ingest.student_vle_rows))?;
    w(out, format!("vle rows                {}", ingest.vle_rows))?;
    w(out, format!("assessments rows        {}", ingest.assessment_rows))?;
    w(out, format!("studentAssessment rows  {}", ingest.student_assessment_rows))?;
    w(out, format!("instances               {}", summary.instances))?;
    w(out, format!("course runs             {}", summary.runs))?;
    w(
        out,
        format!(
            "successful (y=1)        {} ({:.1}%)",
            summary.positives,
            100.0 * summary.positive_fraction
        ),
    )?;
    w(out, format!("interaction records     {}", summary.interaction_records))?;
    w(out, format!("submission records      {}", summary.submission_records))?;
    w(out, format!("dropped interactions    {}", summary.dropped_interactions))?;
    w(out, format!("dropped submissions     {}", summary.dropped_submissions))?;
    w(out, format!("undated submissions     {}", summary.undated_submissions))?;
    w(out, format!("unresolved sites        {}", ingest.unresolved_sites))?;
    Ok(ValidationReport { ingest, summary })
}

fn thread_pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool")
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<(), CliError>) -> Result<(), CliError> {
    let mut out = BufWriter::new(File::create(path).map_err(io_err(path))?);
    f(&mut out)?;
    out.flush().map_err(io_err(path))
}

fn write_audit_log(path: &Path, reports: &[&AuditReport], cohort: &Cohort) -> Result<(), CliError> {
    let keys = cohort.keys();
    write_file(path, |out| {
        for r in reports {
            r.write_jsonl(out, &keys).map_err(io_err(path))?;
        }
        Ok(())
    })
}

/// Removes stale result files and records the failing audit.
fn halt(out_dir: &Path, report: &AuditReport, cohort: &Cohort, err: &mut dyn Write) -> Result<(), CliError> {
    for name in RESULT_FILES {
        let p = out_dir.join(name);
        if p.exists() {
            fs::remove_file(&p).map_err(io_err(&p))?;
        }
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    write_audit_log(&out_dir.join(AUDIT_FILE), &[report], cohort)?;
    let keys = cohort.keys();
    let _ = writeln!(
        err,
        "protocol violation: {} post-cutoff accesses at t={} under {}",
        report.violations.len(),
        report.cutoff,
        report.policy
    );
    for v in report.violations.iter().take(10) {
        let _ = writeln!(
            err,
            "  instance {} group {:?} provenance day {} > {}",
            keys[v.instance], v.group, v.day, report.cutoff
        );
    }
    Ok(())
}

fn manifest(
    command: &str,
    cfg: &BenchmarkConfig,
    data: &LoadedData,
    out_dir: &Path,
    outputs: &[&str],
) -> Result<serde_json::Value, CliError> {
    let mut hashes = serde_json::Map::new();
    for name in outputs {
        hashes.insert(name.to_string(), json!(sha256_file(&out_dir.join(name))?));
    }
    let source = match cfg.source.as_ref().expect("resolved source") {
        DataSource::Oulad(root) => json!({
            "kind": "oulad",
            "root": root.display().to_string(),
            "sha256": data.input_hashes.iter().map(|(n, h)| (n.clone(), json!(h))).collect::<serde_json::Map<_, _>>(),
        }),
        DataSource::Synthetic(s) => json!({ "kind": "synthetic", "config": s }),
    };
    Ok(json!({
        "format_version": 1,
        "tool": format!("leap {}", env!("CARGO_PKG_VERSION")),
        "command": command,
        "config": cfg.to_text(),
        "source": source,
        "cohort": data.cohort.summary(),
        "outputs": hashes,
    }))
}

fn write_manifest(out_dir: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let path = out_dir.join(MANIFEST_FILE);
    write_file(&path, |out| {
        serde_json::to_writer_pretty(&mut *out, value).map_err(|e| CliError::Io {
            path: path.clone(),
            source: e.into(),
        })?;
        out.write_all(b"\n").map_err(io_err(&path))
    })
}

/// Surfaces a strict audit failure: cleans the output directory, then
/// passes the error on.
fn on_eval_error(e: EvalError, cfg: &BenchmarkConfig, cohort: &Cohort, err: &mut dyn Write) -> CliError {
    if let EvalError::Feature(FeatureError::AuditFailed(report)) = &e {
        if let Err(cleanup) = halt(&cfg.out, report, cohort, err) {
            return cleanup;
        }
    }
    e.into()
}

fn print_best(aggregates: &[AggregateResult], out: &mut dyn Write) {
    let mut cells: Vec<&AggregateResult> = aggregates.iter().filter(|a| a.metric == Metric::RocAuc).collect();
    cells.sort_by_key(|a| (a.policy, a.cutoff));
    let mut i = 0;
    while i < cells.len() {
        let key = (cells[i].policy, cells[i].cutoff);
        let mut best = cells[i];
        while i < cells.len() && (cells[i].policy, cells[i].cutoff) == key {
            if cells[i].mean > best.mean {
                best = cells[i];
            }
            i += 1;
        }
        let _ = writeln!(
            out,
            "{} t={:<3} best {:<10} roc_auc {:.4} ± {:.4}",
            best.policy, best.cutoff, best.model, best.mean, best.std
        );
    }
}

pub fn cmd_run(
    cfg: &BenchmarkConfig,
    builder: &dyn DatasetBuilder,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let data = load_source(cfg.source.as_ref().ok_or(ConfigError::NoSource)?)?;
    let plan = BenchmarkPlan {
        cutoffs: cfg.cutoffs.clone(),
        models: cfg.models.clone().unwrap_or_else(|| ModelKind::ALL.to_vec()),
        seeds: cfg.seeds.clone(),
        policies: vec![cfg.policy],
        record_timings: cfg.record_timings,
        importances: true,
    };
    let result = thread_pool(cfg.jobs).install(|| run_benchmark(&data.cohort, &plan, builder));
    let output = result.map_err(|e| on_eval_error(e, cfg, &data.cohort, err))?;
    let aggregates = aggregate(&output.results, &cfg.seeds)?;

    let dir = &cfg.out;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_file(&dir.join(RESULTS_FILE), |w| Ok(write_results(w, &output.results)?))?;
    write_file(&dir.join(AGGREGATE_FILE), |w| Ok(write_aggregates(w, &aggregates)?))?;
    write_file(&dir.join(IMPORTANCE_FILE), |w| Ok(write_importances(w, &output.importances)?))?;
    let audits: Vec<&AuditReport> = output.datasets.iter().map(|d| &d.audit).collect();
    write_audit_log(&dir.join(AUDIT_FILE), &audits, &data.cohort)?;
    let m = manifest(
        "run",
        cfg,
        &data,
        dir,
        &[RESULTS_FILE, AGGREGATE_FILE, IMPORTANCE_FILE, AUDIT_FILE],
    )?;
    write_manifest(dir, &m)?;
    print_best(&aggregates, out);
    let _ = writeln!(out, "{} results written to {}", output.results.len(), dir.display());
    Ok(())
}

pub fn cmd_ablate(
    cfg: &BenchmarkConfig,
    builder: &dyn DatasetBuilder,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let data = load_source(cfg.source.as_ref().ok_or(ConfigError::NoSource)?)?;
    let models = cfg.models.clone().unwrap_or_else(|| vec![ModelKind::Rf, ModelKind::Gbdt]);
    let result = thread_pool(cfg.jobs).install(|| ablation(&data.cohort, &cfg.cutoffs, &models, &cfg.seeds, builder));
    let output = result.map_err(|e| on_eval_error(e, cfg, &data.cohort, err))?;

    let dir = &cfg.out;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_file(&dir.join(RESULTS_FILE), |w| Ok(write_results(w, &output.results)?))?;
    write_file(&dir.join(ABLATION_FILE), |w| Ok(write_ablation(w, &output.rows)?))?;
    write_file(&dir.join(ABLATION_LONG_FILE), |w| Ok(write_aggregates(w, &output.aggregates)?))?;
    let mut resolved = cfg.clone();
    resolved.models = Some(models);
    let m = manifest(
        "ablate",
        &resolved,
        &data,
        dir,
        &[RESULTS_FILE, ABLATION_FILE, ABLATION_LONG_FILE],
    )?;
    write_manifest(dir, &m)?;
    for r in output.rows.iter().filter(|r| r.metric == Metric::RocAuc) {
        let _ = writeln!(
            out,
            "t={:<3} {:<10} strict {:.4}  leaky-assessment {:+.4}  leaky-all {:+.4}",
            r.cutoff,
            r.model,
            r.strict,
            r.delta_assessment(),
            r.delta_all()
        );
    }
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| ConfigError::Read {
                path: path.clone(),
                message: e.to_string(),
            })?;
            config::parse_synth_config(&text)?
        }
        None => leap_core::SynthConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let tables = generate_synthetic(&cfg)?;
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    write_tables(&tables, &args.out)?;
    let _ = writeln!(
        out,
        "{} instances across {} course runs written to {}",
        tables.student_info.len(),
        tables.runs.len(),
        args.out.display()
    );
    Ok(())
}

pub fn cmd_report(args: &ReportArgs, out: &mut dyn Write) -> Result<Vec<AggregateResult>, CliError> {
    let file = File::open(&args.results).map_err(io_err(&args.results))?;
    let results = read_results(io::BufReader::new(file))?;
    let seeds = match &args.seeds {
        Some(s) => parse_seeds(s)?,
        None => leap_core::eval::DEFAULT_SEEDS.to_vec(),
    };
    let aggregates = aggregate(&results, &seeds)?;
    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
            write_file(&dir.join(AGGREGATE_FILE), |w| Ok(write_aggregates(w, &aggregates)?))?;
        }
        None => write_aggregates(&mut *out, &aggregates)?,
    }
    Ok(aggregates)
}

/// Executes a parsed command with the given dataset builder.
pub fn execute(cli: &Cli, builder: &dyn DatasetBuilder, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus {
    let result = match &cli.command {
        Command::Validate(a) => resolve_config(a).and_then(|c| cmd_validate(&c, out)).map(|_| ()),
        Command::Run(a) => resolve_config(a).and_then(|c| cmd_run(&c, builder, out, err)),
        Command::Ablate(a) => resolve_config(a).and_then(|c| cmd_ablate(&c, builder, out, err)),
        Command::Synth(a) => cmd_synth(a, out),
        Command::Report(a) => cmd_report(a, out).map(|_| ()),
    };
    match result {
        Ok(()) => ExitStatus::Ok,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.status()
        }
    }
}

/// Parses `args` (program name first) and executes. Usage errors map to
/// the configuration exit code.
pub fn run_with<I, T>(args: I, builder: &dyn DatasetBuilder, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli, builder, out, err),
        Err(e) => {
            let _ = write!(err, "{e}");
            if e.use_stderr() {
                ExitStatus::Config
            } else {
                ExitStatus::Ok
            }
        }
    }
}

pub fn run<I, T>(args: I) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_with(args, &LeapBuilder, &mut io::stdout(), &mut io::stderr())
}
