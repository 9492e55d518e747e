//! Synthetic OULAD-shaped tables with a planted, tunable outcome signal.
//!
//! Every learner gets a latent engagement level drawn from N(0, 1) and
//! shifted by `±engagement_effect / 2` depending on the outcome, so the
//! effect size is the standardized mean difference between classes. The
//! latent level drives daily activity probability, click volume and
//! submission probability. Scores are drawn the same way with
//! `score_effect` as their standardized class difference. With both effects
//! at zero the outcome is independent of every emitted record.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::tables::{
    AssessmentRow, RawTables, StudentAssessmentRow, StudentInfoRow, StudentVleRow, VleRow,
};
use super::DatasetError;

const RUNS: [(&str, &str); 4] = [("AAA", "2013J"), ("AAA", "2014J"), ("BBB", "2013B"), ("BBB", "2014B")];
const ACTIVITY_TYPES: [&str; 8] = [
    "resource", "oucontent", "forumng", "quiz", "subpage", "url", "homepage", "ouwiki",
];
const SITES_PER_RUN: u32 = 20;
const PRE_COURSE_DAYS: i32 = 10;
const SCORE_MEAN: f64 = 65.0;
const SCORE_SD: f64 = 12.0;
const MISSING_SCORE_RATE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_instances: usize,
    pub course_length_days: i32,
    pub positive_rate: f64,
    /// Standardized class difference of latent engagement.
    pub engagement_effect: f64,
    /// Due days of the dated assessments. Each run also has one undated exam
    /// submitted on the last course day.
    pub assessment_days: Vec<i32>,
    /// Standardized class difference of assessment scores.
    pub score_effect: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_instances: 1000,
            course_length_days: 60,
            positive_rate: 0.47,
            engagement_effect: 1.0,
            assessment_days: vec![19, 33, 47],
            score_effect: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let fail = |m: String| Err(DatasetError::InvalidSynthConfig(m));
        if self.n_instances == 0 {
            return fail("n_instances must be positive".into());
        }
        if self.course_length_days <= 0 {
            return fail("course_length_days must be positive".into());
        }
        if !(self.positive_rate > 0.0 && self.positive_rate < 1.0) {
            return fail(format!("positive_rate {} not in (0, 1)", self.positive_rate));
        }
        if !self.engagement_effect.is_finite() || !self.score_effect.is_finite() {
            return fail("effect sizes must be finite".into());
        }
        if let Some(d) = self
            .assessment_days
            .iter()
            .find(|&&d| d < 0 || d > self.course_length_days)
        {
            return fail(format!(
                "assessment day {d} outside [0, {}]",
                self.course_length_days
            ));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Generates OULAD-schema tables. Output is a pure function of `config`.
pub fn generate_synthetic(config: &SynthConfig) -> Result<RawTables, DatasetError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut tables = RawTables::default();

    let n_runs = RUNS.len().min(config.n_instances);
    let mut run_ids = Vec::with_capacity(n_runs);
    for (module, presentation) in &RUNS[..n_runs] {
        run_ids.push(tables.runs.intern(module, presentation).expect("few runs"));
    }

    // Metadata: sites and assessments per run.
    for (r, &run) in run_ids.iter().enumerate() {
        for k in 0..SITES_PER_RUN {
            tables.vle.push(VleRow {
                site: site_id(r, k),
                run,
                activity_type: ACTIVITY_TYPES[rng.random_range(0..ACTIVITY_TYPES.len())].to_string(),
            });
        }
        for (k, &due) in config.assessment_days.iter().enumerate() {
            tables.assessments.push(AssessmentRow {
                assessment: assessment_id(r, k as u32),
                run,
                date: Some(due),
            });
        }
        tables.assessments.push(AssessmentRow {
            assessment: assessment_id(r, 99),
            run,
            date: None,
        });
    }

    let last_day = config.course_length_days;
    for i in 0..config.n_instances {
        // Contiguous blocks per run keep studentInfo ordered by run.
        let r = i * n_runs / config.n_instances;
        let run = run_ids[r];
        let student = 10_000 + i as u32;
        let positive = rng.random_bool(config.positive_rate);
        let sign = if positive { 0.5 } else { -0.5 };

        let final_result = match (positive, rng.random_bool(if positive { 0.15 } else { 0.4 })) {
            (true, true) => "Distinction",
            (true, false) => "Pass",
            (false, true) => "Withdrawn",
            (false, false) => "Fail",
        };
        tables.student_info.push(StudentInfoRow {
            run,
            student,
            final_result: final_result.to_string(),
        });

        let engagement = std_normal.sample(&mut rng) + config.engagement_effect * sign;
        let p_active = sigmoid(-1.2 + 0.8 * engagement);
        let clicks = Poisson::new((0.5 + 0.3 * engagement).exp()).expect("positive rate");
        for day in -PRE_COURSE_DAYS..=last_day {
            if !rng.random_bool(p_active) {
                continue;
            }
            let n_records = rng.random_range(1..=3);
            for _ in 0..n_records {
                let site = site_id(r, rng.random_range(0..SITES_PER_RUN));
                let extra: f64 = clicks.sample(&mut rng);
                tables.student_vle.push(StudentVleRow {
                    run,
                    student,
                    site,
                    date: day,
                    sum_click: 1 + extra as u32,
                });
            }
        }

        let p_submit = sigmoid(1.5 + 0.7 * engagement);
        let submit = |rng: &mut ChaCha8Rng, assessment: u32, day: i32, tables: &mut RawTables| {
            let score = if rng.random_bool(MISSING_SCORE_RATE) {
                None
            } else {
                let z = std_normal.sample(rng) + config.score_effect * sign;
                Some((SCORE_MEAN + SCORE_SD * z).round().clamp(0.0, 100.0))
            };
            tables.student_assessment.push(StudentAssessmentRow {
                assessment,
                student,
                date_submitted: Some(day),
                is_banked: false,
                score,
            });
        };
        for (k, &due) in config.assessment_days.iter().enumerate() {
            if rng.random_bool(p_submit) {
                let day = (due + rng.random_range(-5..=2)).min(last_day);
                submit(&mut rng, assessment_id(r, k as u32), day, &mut tables);
            }
        }
        if rng.random_bool(p_submit) {
            submit(&mut rng, assessment_id(r, 99), last_day, &mut tables);
        }
    }
    Ok(tables)
}

fn site_id(run: usize, k: u32) -> u32 {
    500_000 + run as u32 * 1_000 + k
}

fn assessment_id(run: usize, k: u32) -> u32 {
    1_000 + run as u32 * 100 + k
}
