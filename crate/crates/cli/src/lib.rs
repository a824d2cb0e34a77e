//! Experiment orchestration for `dropq`: configuration files, parallel
//! seeded trials, CSV and JSON artifacts, and paired run comparison.

pub mod config;
pub mod error;
pub mod experiment;
pub mod report;

pub use config::{ExperimentConfig, Overrides};
pub use error::CliError;
pub use experiment::{run_experiment, ExperimentOutput, RunSummary};
pub use report::{compare_dirs, format_comparison, Comparison};
