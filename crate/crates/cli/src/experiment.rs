//! Multi-trial runs: parallel execution, CSV artifacts and `summary.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use dropq_core::dqn::{run_trial, trial_seed, AgentConfig, Algorithm, TrialAbort, TrialLog};
use dropq_core::envs::EnvKind;
use dropq_core::stats::RunningStats;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::report::{compare_runs, Comparison, TrialScores};

pub type TrialResult = Result<TrialLog, TrialAbort>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortRecord {
    pub trial: usize,
    pub seed: u64,
    pub episodes_completed: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    /// Number of post-episode probes (epoch 0 excluded).
    pub epochs: usize,
    /// Time average of the trial-mean gap over the last third of probes.
    pub final_third_mean_gap: f64,
    /// Largest trial-mean gap among probes taken after every trial had
    /// started training.
    pub peak_gap: Option<f64>,
    pub peak_epoch: Option<usize>,
}

/// Contents of a single-algorithm `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub env: String,
    pub algo: String,
    pub trials: usize,
    pub episodes: usize,
    pub master_seed: u64,
    pub trial_seeds: Vec<u64>,
    pub completed_trials: Vec<usize>,
    pub aborted: Vec<AbortRecord>,
    /// Mean and population std of every episode score of completed trials.
    pub pooled_avg: Option<f64>,
    pub pooled_std: Option<f64>,
    pub overestimation: Option<GapSummary>,
    pub config: BTreeMap<String, String>,
}

/// Top-level `summary.json` when several algorithms run on matched seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: BTreeMap<String, String>,
    pub runs: Vec<RunSummary>,
    /// Every other algorithm against the first.
    pub comparisons: Vec<Comparison>,
}

/// One algorithm's trials, with scores needed for pairing.
#[derive(Debug, Clone)]
pub struct AlgoRun {
    pub algo: Algorithm,
    pub dir: PathBuf,
    pub results: Vec<TrialResult>,
    pub summary: RunSummary,
}

pub fn default_jobs(trials: usize) -> usize {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    trials.min(cores).max(1)
}

/// Runs `trials` seeded trials on `jobs` threads; results come back in
/// trial order regardless of scheduling.
pub fn run_trials(
    env: EnvKind,
    algo: Algorithm,
    agent: &AgentConfig,
    trials: usize,
    master_seed: u64,
    jobs: usize,
) -> Result<Vec<TrialResult>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("jobs: cannot start {jobs} threads: {e}")))?;
    Ok(pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|i| run_trial::<f64>(env, algo, agent, trial_seed(master_seed, i)))
            .collect()
    }))
}

fn log_of(r: &TrialResult) -> &TrialLog {
    match r {
        Ok(log) => log,
        Err(abort) => &abort.log,
    }
}

fn summarize_gaps(results: &[TrialResult]) -> Option<GapSummary> {
    let done: Vec<&TrialLog> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let first = done.first()?;
    let n_points = first.overestimation.len();
    if n_points < 2 || done.iter().any(|l| l.overestimation.len() != n_points) {
        return None;
    }
    let n = done.len() as f64;
    let mean: Vec<f64> = (0..n_points)
        .map(|k| done.iter().map(|l| l.overestimation[k].gap.gap).sum::<f64>() / n)
        .collect();
    let epochs = n_points - 1;
    let tail = (epochs / 3).max(1);
    let final_third_mean_gap = mean[n_points - tail..].iter().sum::<f64>() / tail as f64;
    let trained = |k: usize| done.iter().all(|l| l.overestimation[k].train_steps > 0);
    let peak = (1..n_points)
        .filter(|&k| trained(k))
        .max_by(|&a, &b| mean[a].total_cmp(&mean[b]));
    Some(GapSummary {
        epochs,
        final_third_mean_gap,
        peak_gap: peak.map(|k| mean[k]),
        peak_epoch: peak.map(|k| first.overestimation[k].eval_epoch),
    })
}

pub fn summarize(cfg: &ExperimentConfig, algo: Algorithm, results: &[TrialResult]) -> RunSummary {
    let mut pooled = RunningStats::default();
    let mut completed = Vec::new();
    let mut aborted = Vec::new();
    for (i, r) in results.iter().enumerate() {
        match r {
            Ok(log) => {
                completed.push(i);
                log.scores.iter().for_each(|&s| pooled.push(s));
            }
            Err(abort) => aborted.push(AbortRecord {
                trial: i,
                seed: abort.log.seed,
                episodes_completed: abort.log.scores.len(),
                error: abort.error.to_string(),
            }),
        }
    }
    let have = pooled.count() > 0;
    RunSummary {
        env: cfg.env.name().to_string(),
        algo: algo.name().to_string(),
        trials: cfg.trials,
        episodes: cfg.agent.episodes_per_trial,
        master_seed: cfg.master_seed,
        trial_seeds: (0..cfg.trials).map(|i| trial_seed(cfg.master_seed, i)).collect(),
        completed_trials: completed,
        aborted,
        pooled_avg: have.then(|| pooled.mean()),
        pooled_std: have.then(|| pooled.std()),
        overestimation: summarize_gaps(results),
        config: config_echo(cfg, Some(algo)),
    }
}

fn config_echo(cfg: &ExperimentConfig, algo: Option<Algorithm>) -> BTreeMap<String, String> {
    let mut map: BTreeMap<String, String> = cfg
        .to_pairs()
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    if let Some(a) = algo {
        map.insert("algo".into(), a.name().into());
    }
    map
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn csv_writer(path: &Path, header: &[&str]) -> Result<csv::Writer<fs::File>, CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::data(path, e))?;
    w.write_record(header).map_err(|e| CliError::data(path, e))?;
    Ok(w)
}

/// Writes episodes.csv, loss.csv and (Gridworld) overestimation.csv.
/// Rows of aborted trials cover whatever they completed.
pub fn write_csvs(dir: &Path, env: EnvKind, results: &[TrialResult]) -> Result<(), CliError> {
    create_dir(dir)?;
    let path = dir.join("episodes.csv");
    let mut w = csv_writer(&path, &["trial", "episode", "score", "epsilon_at_end"])?;
    for (t, r) in results.iter().enumerate() {
        let log = log_of(r);
        for (e, (s, eps)) in log.scores.iter().zip(&log.epsilon_at_end).enumerate() {
            w.write_record([t.to_string(), e.to_string(), s.to_string(), eps.to_string()])
                .map_err(|e| CliError::data(&path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;

    let path = dir.join("loss.csv");
    let mut w = csv_writer(&path, &["trial", "step", "ema_loss"])?;
    for (t, r) in results.iter().enumerate() {
        for p in &log_of(r).loss {
            w.write_record([t.to_string(), p.step.to_string(), p.ema_loss.to_string()])
                .map_err(|e| CliError::data(&path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;

    if env == EnvKind::Gridworld {
        let path = dir.join("overestimation.csv");
        let mut w = csv_writer(&path, &["trial", "eval_epoch", "mean_max_q", "optimal_mean", "gap"])?;
        for (t, r) in results.iter().enumerate() {
            for p in &log_of(r).overestimation {
                w.write_record([
                    t.to_string(),
                    p.eval_epoch.to_string(),
                    p.gap.mean_max_q.to_string(),
                    p.gap.optimal_mean.to_string(),
                    p.gap.gap.to_string(),
                ])
                .map_err(|e| CliError::data(&path, e))?;
            }
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
    }
    Ok(())
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::data(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Output of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub runs: Vec<AlgoRun>,
    pub comparisons: Vec<Comparison>,
}

/// Runs every configured algorithm on the same trial seeds and writes all
/// artifacts under `cfg.out_dir`. A single algorithm writes directly into
/// the output directory; several get one subdirectory each plus a
/// top-level summary with comparisons against the first.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    cfg.validate()?;
    let jobs = cfg.jobs.unwrap_or_else(|| default_jobs(cfg.trials));
    let multi = cfg.algos.len() > 1;
    create_dir(&cfg.out_dir)?;
    fs::write(cfg.out_dir.join("config.txt"), cfg.to_text())
        .map_err(|e| CliError::io(&cfg.out_dir, e))?;

    let mut runs = Vec::new();
    for &algo in &cfg.algos {
        let dir = if multi {
            cfg.out_dir.join(algo.name())
        } else {
            cfg.out_dir.clone()
        };
        let results = run_trials(cfg.env, algo, &cfg.agent, cfg.trials, cfg.master_seed, jobs)?;
        write_csvs(&dir, cfg.env, &results)?;
        let summary = summarize(cfg, algo, &results);
        write_json(&dir.join("summary.json"), &summary)?;
        runs.push(AlgoRun {
            algo,
            dir,
            results,
            summary,
        });
    }

    let mut comparisons = Vec::new();
    if let Some((base, rest)) = runs.split_first() {
        for other in rest {
            comparisons.push(compare_runs(
                &base.summary,
                &scores_by_trial(&base.results),
                &other.summary,
                &scores_by_trial(&other.results),
            )?);
        }
    }
    if multi {
        write_json(
            &cfg.out_dir.join("summary.json"),
            &ExperimentSummary {
                config: config_echo(cfg, None),
                runs: runs.iter().map(|r| r.summary.clone()).collect(),
                comparisons: comparisons.clone(),
            },
        )?;
    }
    Ok(ExperimentOutput { runs, comparisons })
}

/// Episode scores per trial; aborted trials map to `None`.
pub fn scores_by_trial(results: &[TrialResult]) -> TrialScores {
    results
        .iter()
        .map(|r| r.as_ref().ok().map(|log| log.scores.clone()))
        .collect()
}
