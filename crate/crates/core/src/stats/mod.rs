//! Cross-trial aggregation and paired nonparametric comparison of runs.

mod aggregate;
mod wilcoxon;

pub use aggregate::{aggregate, variance_reduction_percent, RunningStats, TrialEnsemble};
pub use wilcoxon::{
    exact_p_value, normal_p_value, signed_rank_abs, wilcoxon_signed_rank, wilcoxon_signed_rank_with,
    PValueMethod, WilcoxonResult, EXACT_MAX_N,
};
