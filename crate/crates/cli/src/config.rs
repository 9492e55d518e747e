//! Flat `key = value` configuration files.
//!
//! One setting per line, `#` starts a comment, list values are
//! comma-separated. A benchmark config names either `data_root` or a
//! synthetic source (`synth.*` keys inline, or `synth_config = PATH`
//! pointing at a file of bare synth keys).
//!
//! ```text
//! data_root = /data/oulad
//! cutoffs = 7,14,21,28
//! models = RF,GBDT
//! seeds = 0,1,2,3,4
//! policy = strict
//! out = results
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use leap_core::eval::{DEFAULT_CUTOFFS, DEFAULT_SEEDS};
use leap_core::{LeakagePolicy, ModelKind, SynthConfig};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{key}`: {message}")]
    Value { key: String, message: String },
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("no data source: set data_root or synthetic settings")]
    NoSource,
    #[error("both data_root and synthetic settings are set")]
    ConflictingSources,
    #[error("cannot read {path}: {message}")]
    Read { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Oulad(PathBuf),
    Synthetic(SynthConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub source: Option<DataSource>,
    pub cutoffs: Vec<i32>,
    /// `None` leaves the choice to the command.
    pub models: Option<Vec<ModelKind>>,
    pub seeds: Vec<u64>,
    pub policy: LeakagePolicy,
    pub out: PathBuf,
    pub jobs: usize,
    pub record_timings: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            source: None,
            cutoffs: DEFAULT_CUTOFFS.to_vec(),
            models: None,
            seeds: DEFAULT_SEEDS.to_vec(),
            policy: LeakagePolicy::Strict,
            out: PathBuf::from("leap-out"),
            jobs: 0,
            record_timings: false,
        }
    }
}

/// Key/value pairs in file order.
fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>, ConfigError> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::Syntax { line });
        }
        if seen.insert(key.to_string(), line).is_some() {
            return Err(ConfigError::Duplicate {
                line,
                key: key.to_string(),
            });
        }
        out.push((line, key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

fn value_err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        message: message.into(),
    }
}

fn scalar<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| value_err(key, format!("invalid value `{value}`")))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError> {
    if value.is_empty() {
        return Err(value_err(key, "empty list"));
    }
    value.split(',').map(|v| scalar(key, v.trim())).collect()
}

fn boolean(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(value_err(key, format!("expected true or false, got `{value}`"))),
    }
}

pub fn parse_cutoffs(value: &str) -> Result<Vec<i32>, ConfigError> {
    let cutoffs: Vec<i32> = list("cutoffs", value)?;
    if cutoffs[0] <= 0 || cutoffs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(value_err("cutoffs", "must be strictly increasing positive integers"));
    }
    Ok(cutoffs)
}

pub fn parse_models(value: &str) -> Result<Vec<ModelKind>, ConfigError> {
    let mut models = Vec::new();
    for name in value.split(',').map(str::trim) {
        let kind: ModelKind = name.parse().map_err(|_| ConfigError::UnknownModel(name.to_string()))?;
        if !models.contains(&kind) {
            models.push(kind);
        }
    }
    Ok(models)
}

pub fn parse_seeds(value: &str) -> Result<Vec<u64>, ConfigError> {
    let seeds: Vec<u64> = list("seeds", value)?;
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != seeds.len() {
        return Err(value_err("seeds", "duplicate seed"));
    }
    Ok(seeds)
}

pub fn parse_policy(value: &str) -> Result<LeakagePolicy, ConfigError> {
    value.parse().map_err(|e: String| value_err("policy", e))
}

/// Applies one bare synth key. Returns false for keys it does not know.
fn apply_synth_key(cfg: &mut SynthConfig, key: &str, value: &str) -> Result<bool, ConfigError> {
    match key {
        "n_instances" => cfg.n_instances = scalar(key, value)?,
        "course_length_days" => cfg.course_length_days = scalar(key, value)?,
        "positive_rate" => cfg.positive_rate = scalar(key, value)?,
        "engagement_effect" => cfg.engagement_effect = scalar(key, value)?,
        "score_effect" => cfg.score_effect = scalar(key, value)?,
        "assessment_days" => {
            cfg.assessment_days = if value.is_empty() { Vec::new() } else { list(key, value)? }
        }
        "seed" => cfg.seed = scalar(key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

fn check_synth(cfg: &SynthConfig) -> Result<(), ConfigError> {
    cfg.validate().map_err(|e| value_err("synth", e.to_string()))
}

/// Parses a synthetic-generator config: bare keys `n_instances`,
/// `course_length_days`, `positive_rate`, `engagement_effect`,
/// `score_effect`, `assessment_days`, `seed`. Unset keys keep defaults.
pub fn parse_synth_config(text: &str) -> Result<SynthConfig, ConfigError> {
    let mut cfg = SynthConfig::default();
    for (_, key, value) in parse_pairs(text)? {
        if !apply_synth_key(&mut cfg, &key, &value)? {
            return Err(ConfigError::UnknownKey(key));
        }
    }
    check_synth(&cfg)?;
    Ok(cfg)
}

pub fn synth_config_text(cfg: &SynthConfig) -> String {
    let days: Vec<String> = cfg.assessment_days.iter().map(i32::to_string).collect();
    format!(
        "n_instances = {}\ncourse_length_days = {}\npositive_rate = {}\nengagement_effect = {}\nscore_effect = {}\nassessment_days = {}\nseed = {}\n",
        cfg.n_instances,
        cfg.course_length_days,
        cfg.positive_rate,
        cfg.engagement_effect,
        cfg.score_effect,
        days.join(","),
        cfg.seed
    )
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Parses a benchmark config. Relative paths are resolved against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<BenchmarkConfig, ConfigError> {
    let mut cfg = BenchmarkConfig::default();
    let mut data_root = None;
    let mut synth: Option<SynthConfig> = None;
    let mut synth_file = None;
    let resolve = |v: &str| {
        let p = PathBuf::from(v);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    };
    for (_, key, value) in parse_pairs(text)? {
        match key.as_str() {
            "data_root" => data_root = Some(resolve(&value)),
            "cutoffs" => cfg.cutoffs = parse_cutoffs(&value)?,
            "models" => cfg.models = Some(parse_models(&value)?),
            "seeds" => cfg.seeds = parse_seeds(&value)?,
            "policy" => cfg.policy = parse_policy(&value)?,
            "out" => cfg.out = resolve(&value),
            "jobs" => cfg.jobs = scalar(&key, &value)?,
            "record_timings" => cfg.record_timings = boolean(&key, &value)?,
            "synth_config" => synth_file = Some(resolve(&value)),
            k => match k.strip_prefix("synth.") {
                Some(bare) => {
                    if !apply_synth_key(synth.get_or_insert_with(SynthConfig::default), bare, &value)? {
                        return Err(ConfigError::UnknownKey(key));
                    }
                }
                None => return Err(ConfigError::UnknownKey(key)),
            },
        }
    }
    if cfg.out.is_relative() {
        cfg.out = base.join(&cfg.out);
    }
    if let Some(path) = synth_file {
        if synth.is_some() {
            return Err(value_err("synth_config", "cannot be combined with inline synth.* keys"));
        }
        synth = Some(parse_synth_config(&read(&path)?)?);
    }
    cfg.source = match (data_root, synth) {
        (Some(_), Some(_)) => return Err(ConfigError::ConflictingSources),
        (Some(root), None) => Some(DataSource::Oulad(root)),
        (None, Some(s)) => {
            check_synth(&s)?;
            Some(DataSource::Synthetic(s))
        }
        (None, None) => None,
    };
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<BenchmarkConfig, ConfigError> {
    let base = path.parent().unwrap_or(Path::new(""));
    parse_config(&read(path)?, base)
}

impl BenchmarkConfig {
    /// Canonical config text. Parsing it back yields the same config, so it
    /// doubles as the manifest's re-execution recipe.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match &self.source {
            Some(DataSource::Oulad(root)) => writeln!(s, "data_root = {}", root.display()).unwrap(),
            Some(DataSource::Synthetic(cfg)) => {
                for line in synth_config_text(cfg).lines() {
                    writeln!(s, "synth.{line}").unwrap();
                }
            }
            None => {}
        }
        let join = |v: Vec<String>| v.join(",");
        writeln!(s, "cutoffs = {}", join(self.cutoffs.iter().map(i32::to_string).collect())).unwrap();
        if let Some(models) = &self.models {
            writeln!(s, "models = {}", join(models.iter().map(|m| m.name().to_string()).collect())).unwrap();
        }
        writeln!(s, "seeds = {}", join(self.seeds.iter().map(u64::to_string).collect())).unwrap();
        writeln!(s, "policy = {}", self.policy).unwrap();
        writeln!(s, "out = {}", self.out.display()).unwrap();
        writeln!(s, "jobs = {}", self.jobs).unwrap();
        writeln!(s, "record_timings = {}", self.record_timings).unwrap();
        s
    }
}
