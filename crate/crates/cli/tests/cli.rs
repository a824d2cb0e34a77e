use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dropq_cli::experiment::ExperimentSummary;
use dropq_cli::{run_experiment, ExperimentConfig, Overrides, RunSummary};

const SMALL_GRID: &str = "env = gridworld\nhidden_sizes = 16,16\nwarmup_transitions = 64\nepisodes = 8\n";

fn dropq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dropq")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path
}

fn csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn run_in(dir: &Path, text: &str, overrides: Overrides) -> dropq_cli::ExperimentOutput {
    let o = Overrides {
        out_dir: Some(dir.to_path_buf()),
        ..overrides
    };
    run_experiment(&ExperimentConfig::from_text(text, &o).unwrap()).unwrap()
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let o = || Overrides {
        trials: Some(1),
        episodes: Some(5),
        seed: Some(3),
        ..Overrides::default()
    };
    run_in(&a, SMALL_GRID, o());
    run_in(&b, SMALL_GRID, o());
    let (ca, cb) = (csvs(&a), csvs(&b));
    assert_eq!(ca.len(), 3);
    assert_eq!(ca, cb);
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("serial"), tmp.path().join("parallel"));
    let o = |jobs| Overrides {
        trials: Some(3),
        jobs: Some(jobs),
        ..Overrides::default()
    };
    run_in(&a, SMALL_GRID, o(1));
    run_in(&b, SMALL_GRID, o(3));
    assert_eq!(csvs(&a), csvs(&b));
}

#[test]
fn csv_headers_are_fixed() {
    let tmp = tempfile::tempdir().unwrap();
    run_in(tmp.path(), SMALL_GRID, Overrides { trials: Some(2), ..Overrides::default() });
    let first_line = |name: &str| {
        fs::read_to_string(tmp.path().join(name)).unwrap().lines().next().unwrap().to_string()
    };
    assert_eq!(first_line("episodes.csv"), "trial,episode,score,epsilon_at_end");
    assert_eq!(first_line("loss.csv"), "trial,step,ema_loss");
    assert_eq!(first_line("overestimation.csv"), "trial,eval_epoch,mean_max_q,optimal_mean,gap");
    let episodes = fs::read_to_string(tmp.path().join("episodes.csv")).unwrap();
    assert_eq!(episodes.lines().count(), 1 + 2 * 8);
}

#[test]
fn cartpole_run_writes_no_overestimation_file() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "env = cartpole\nhidden_sizes = 8\nwarmup_transitions = 32\nepisodes = 3\ntrials = 2\n";
    let out = run_in(tmp.path(), text, Overrides::default());
    assert!(!tmp.path().join("overestimation.csv").exists());
    assert!(out.runs[0].summary.overestimation.is_none());
}

#[test]
fn two_algorithms_get_subdirectories_and_a_comparison() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Overrides {
        algo: Some("dqn,gaussian-dropout".into()),
        trials: Some(2),
        ..Overrides::default()
    };
    let out = run_in(tmp.path(), SMALL_GRID, o);
    assert_eq!(out.comparisons.len(), 1);
    for algo in ["dqn", "gaussian-dropout"] {
        let s: RunSummary =
            serde_json::from_str(&fs::read_to_string(tmp.path().join(algo).join("summary.json")).unwrap()).unwrap();
        assert_eq!(s.algo, algo);
        assert_eq!(s.config["episodes"], "8");
    }
    let top: ExperimentSummary =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(top.runs.len(), 2);
    let c = &top.comparisons[0];
    assert_eq!((c.baseline.as_str(), c.candidate.as_str()), ("dqn", "gaussian-dropout"));
    assert_eq!(c.n_pairs, 16);
    if let Some(w) = &c.wilcoxon {
        assert!((0.0..=1.0).contains(&w.p_value));
    }

    let report = dropq(&[
        "compare",
        tmp.path().join("dqn").to_str().unwrap(),
        tmp.path().join("gaussian-dropout").to_str().unwrap(),
    ]);
    assert!(report.status.success());
    let text = String::from_utf8(report.stdout).unwrap();
    assert!(text.contains("Average (std)") && text.contains("Variance reduction"), "{text}");
}

#[test]
fn binary_run_then_self_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_GRID);
    let out_dir = tmp.path().join("out");
    let run = dropq(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--trials",
        "2",
        "--episodes",
        "12",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let s: RunSummary = serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!((s.trials, s.episodes), (2, 12));
    assert!(s.pooled_std.unwrap() > 0.0);

    let d = out_dir.to_str().unwrap();
    let cmp = dropq(&["compare", d, d]);
    assert!(cmp.status.success());
    let text = String::from_utf8(cmp.stdout).unwrap();
    assert!(text.contains("Variance reduction: 0.00%"), "{text}");
    assert!(text.contains("insufficient data"), "{text}");
}

#[test]
fn compare_rejects_mismatched_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_in(&a, SMALL_GRID, Overrides { trials: Some(2), episodes: Some(4), ..Overrides::default() });
    run_in(&b, SMALL_GRID, Overrides { trials: Some(2), episodes: Some(5), ..Overrides::default() });
    let cmp = dropq(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(cmp.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&cmp.stderr).contains("config error"));
}

#[test]
fn unknown_config_key_exits_with_its_name() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "env = gridworld\nbatchsize = 4\n");
    let out = dropq(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("batchsize"));
}

#[test]
fn invalid_value_exits_with_its_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "env = gridworld\nepsilon_start = 0.1\nepsilon_end = 0.5\n");
    let out = dropq(&["run", "--config", cfg.to_str().unwrap(), "--out-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon_end"));
}

#[test]
fn aborted_trial_is_recorded_and_others_finish() {
    let tmp = tempfile::tempdir().unwrap();
    // This learning rate overflows the parameters on the first update, which
    // happens only in trials whose single episode outlasts the warmup.
    let text = "env = gridworld\nhidden_sizes = 8\nwarmup_transitions = 40\nlr = 1e200\ngrad_clip = 0\nepisodes = 1\ntrials = 8\n";
    let out = run_in(tmp.path(), text, Overrides::default());
    let s = &out.runs[0].summary;
    assert!(!s.aborted.is_empty() && !s.completed_trials.is_empty(), "{s:?}");
    assert_eq!(s.completed_trials.len() + s.aborted.len(), 8);
    for a in &s.aborted {
        assert!(a.error.contains("non-finite"), "{}", a.error);
        assert_eq!(a.episodes_completed, 0);
    }
    // Completed trials are the ones that never trained, so their scores are
    // exactly those of the same seeds under a sane learning rate.
    let sane = tmp.path().join("sane");
    let o = Overrides { out_dir: Some(sane.clone()), ..Overrides::default() };
    run_experiment(&ExperimentConfig::from_text(&text.replace("1e200", "0.001"), &o).unwrap()).unwrap();
    let rows = |dir: &Path| -> Vec<String> {
        fs::read_to_string(dir.join("episodes.csv")).unwrap().lines().skip(1).map(String::from).collect()
    };
    let sane_rows = rows(&sane);
    for row in rows(tmp.path()) {
        assert!(sane_rows.contains(&row), "{row}");
    }
    let report = dropq_cli::report::load_run(tmp.path()).unwrap();
    assert_eq!(report.1.iter().filter(|t| t.is_some()).count(), s.completed_trials.len());
}
