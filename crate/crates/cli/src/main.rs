use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dropq_cli::{compare_dirs, format_comparison, run_experiment, CliError, ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(name = "dropq", version, about = "DQN with dropout regularizers: run and compare experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded trials and write CSVs plus summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        env: Option<String>,
        /// One algorithm or a comma-separated list run on matched seeds.
        #[arg(long)]
        algo: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Compare two single-algorithm run directories on matched seeds.
    Compare { dir_a: PathBuf, dir_b: PathBuf },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            env,
            algo,
            trials,
            seed,
            episodes,
            jobs,
            out_dir,
        } => {
            let overrides = Overrides {
                env,
                algo,
                trials,
                seed,
                episodes,
                jobs,
                out_dir,
            };
            let cfg = ExperimentConfig::load(&config, &overrides)?;
            let out = run_experiment(&cfg)?;
            for r in &out.runs {
                let s = &r.summary;
                match (s.pooled_avg, s.pooled_std) {
                    (Some(avg), Some(std)) => println!(
                        "{}: {avg:.3} ({std:.3}) over {}/{} trials -> {}",
                        s.algo,
                        s.completed_trials.len(),
                        s.trials,
                        r.dir.display()
                    ),
                    _ => println!("{}: no completed trials -> {}", s.algo, r.dir.display()),
                }
                for a in &s.aborted {
                    eprintln!("{}: trial {} aborted after {} episodes: {}", s.algo, a.trial, a.episodes_completed, a.error);
                }
                if let Some(g) = &s.overestimation {
                    println!("  final-third mean overestimation gap: {:.4}", g.final_third_mean_gap);
                }
            }
            for c in &out.comparisons {
                println!();
                print!("{}", format_comparison(c));
            }
            Ok(())
        }
        Command::Compare { dir_a, dir_b } => {
            print!("{}", format_comparison(&compare_dirs(&dir_a, &dir_b)?));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
