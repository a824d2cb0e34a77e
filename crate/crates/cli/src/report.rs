//! Paired comparison of two runs: average (std) per algorithm, Wilcoxon
//! signed-rank statistic with p-value, and variance reduction.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use dropq_core::stats::{variance_reduction_percent, wilcoxon_signed_rank, PValueMethod, RunningStats};
use dropq_core::Error;

use crate::error::CliError;
use crate::experiment::RunSummary;

/// Episode scores per trial; `None` for an aborted trial.
pub type TrialScores = Vec<Option<Vec<f64>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonSummary {
    /// `W+` of the differences `baseline − candidate`.
    pub statistic: f64,
    pub p_value: f64,
    pub n_effective: usize,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    pub candidate: String,
    /// Trials completed by both runs; only these are paired.
    pub paired_trials: usize,
    /// Paired `(trial, episode)` scores.
    pub n_pairs: usize,
    pub baseline_avg: f64,
    pub baseline_std: f64,
    pub candidate_avg: f64,
    pub candidate_std: f64,
    pub wilcoxon: Option<WilcoxonSummary>,
    /// `100 · (baseline_std − candidate_std) / baseline_std`.
    pub variance_reduction_percent: Option<f64>,
    /// Why a statistic is missing, if one is.
    pub notes: Vec<String>,
}

/// Pairs two runs by `(trial, episode)` and compares them. Trials aborted
/// in either run are left out.
pub fn compare_runs(
    a: &RunSummary,
    a_scores: &[Option<Vec<f64>>],
    b: &RunSummary,
    b_scores: &[Option<Vec<f64>>],
) -> Result<Comparison, CliError> {
    let mismatch = |what: &str| {
        Err(CliError::Config(format!(
            "runs `{}` and `{}` are not comparable: {what} differ",
            a.algo, b.algo
        )))
    };
    if a.env != b.env {
        return mismatch("environments");
    }
    if a.episodes != b.episodes {
        return mismatch("episode counts");
    }
    if a.trials != b.trials || a_scores.len() != b_scores.len() {
        return mismatch("trial counts");
    }
    if a.trial_seeds != b.trial_seeds {
        return mismatch("trial seeds");
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut paired_trials = 0;
    for (sa, sb) in a_scores.iter().zip(b_scores) {
        if let (Some(sa), Some(sb)) = (sa, sb) {
            if sa.len() != sb.len() {
                return mismatch("per-trial episode counts");
            }
            paired_trials += 1;
            xs.extend_from_slice(sa);
            ys.extend_from_slice(sb);
        }
    }
    let sa: RunningStats = xs.iter().copied().collect();
    let sb: RunningStats = ys.iter().copied().collect();
    let mut notes = Vec::new();
    let wilcoxon = match wilcoxon_signed_rank(&xs, &ys) {
        Ok(w) => Some(WilcoxonSummary {
            statistic: w.statistic,
            p_value: w.p_value,
            n_effective: w.n_effective,
            method: match w.method {
                PValueMethod::Exact => "exact",
                _ => "normal",
            }
            .into(),
        }),
        Err(e @ Error::InsufficientData(_)) => {
            notes.push(format!("Wilcoxon: {e}"));
            None
        }
        Err(e) => return Err(e.into()),
    };
    let variance_reduction_percent = match variance_reduction_percent(sa.std(), sb.std()) {
        Ok(v) => Some(v),
        Err(e) => {
            notes.push(format!("variance reduction: {e}"));
            None
        }
    };
    Ok(Comparison {
        baseline: a.algo.clone(),
        candidate: b.algo.clone(),
        paired_trials,
        n_pairs: xs.len(),
        baseline_avg: sa.mean(),
        baseline_std: sa.std(),
        candidate_avg: sb.mean(),
        candidate_std: sb.std(),
        wilcoxon,
        variance_reduction_percent,
        notes,
    })
}

#[derive(Debug, Deserialize)]
struct EpisodeRow {
    trial: usize,
    episode: usize,
    score: f64,
    #[allow(dead_code)]
    epsilon_at_end: f64,
}

/// Reads a single-algorithm run directory (`summary.json` and
/// `episodes.csv`). Aborted trials come back as `None`.
pub fn load_run(dir: &Path) -> Result<(RunSummary, TrialScores), CliError> {
    let path = dir.join("summary.json");
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let summary: RunSummary = serde_json::from_str(&text).map_err(|e| {
        CliError::data(&path, format!("{e} (multi-algorithm runs keep one run per subdirectory)"))
    })?;

    let path = dir.join("episodes.csv");
    let mut reader = csv::Reader::from_path(&path).map_err(|e| CliError::data(&path, e))?;
    let mut scores: Vec<Vec<f64>> = vec![Vec::new(); summary.trials];
    for row in reader.deserialize() {
        let row: EpisodeRow = row.map_err(|e| CliError::data(&path, e))?;
        let trial = scores
            .get_mut(row.trial)
            .ok_or_else(|| CliError::data(&path, format!("trial {} beyond trial count", row.trial)))?;
        if row.episode != trial.len() {
            return Err(CliError::data(&path, format!("trial {} episodes out of order", row.trial)));
        }
        trial.push(row.score);
    }
    let out = scores
        .into_iter()
        .enumerate()
        .map(|(t, s)| summary.completed_trials.contains(&t).then_some(s))
        .collect();
    Ok((summary, out))
}

pub fn compare_dirs(a: &Path, b: &Path) -> Result<Comparison, CliError> {
    let (sa, xa) = load_run(a)?;
    let (sb, xb) = load_run(b)?;
    compare_runs(&sa, &xa, &sb, &xb)
}

/// Plain-text table in the shape of a results table: one row per
/// algorithm with `average (std)`, then the test and variance lines.
pub fn format_comparison(c: &Comparison) -> String {
    let width = c.baseline.len().max(c.candidate.len()).max(9) + 2;
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}Average (std)", "Algorithm");
    let _ = writeln!(out, "{:<width$}{:.3} ({:.3})", c.baseline, c.baseline_avg, c.baseline_std);
    let _ = writeln!(out, "{:<width$}{:.3} ({:.3})", c.candidate, c.candidate_avg, c.candidate_std);
    let _ = writeln!(out);
    let _ = writeln!(out, "paired episodes: {} over {} trials", c.n_pairs, c.paired_trials);
    match &c.wilcoxon {
        Some(w) => {
            let _ = writeln!(
                out,
                "Wilcoxon signed-rank statistic (p-value): {} ({:.4}) [{} nonzero differences, {}]",
                w.statistic, w.p_value, w.n_effective, w.method
            );
        }
        None => {
            let _ = writeln!(out, "Wilcoxon signed-rank statistic (p-value): n/a");
        }
    }
    match c.variance_reduction_percent {
        Some(v) => {
            let _ = writeln!(out, "Variance reduction: {v:.2}%");
        }
        None => {
            let _ = writeln!(out, "Variance reduction: n/a");
        }
    }
    for note in &c.notes {
        let _ = writeln!(out, "note: {note}");
    }
    out
}
