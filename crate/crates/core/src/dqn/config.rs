use std::fmt;
use std::str::FromStr;

use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, DropoutKind};
use crate::schedule::LinearSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Dqn,
    StandardDropout,
    GaussianDropout,
    VariationalDropout,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Dqn,
        Algorithm::StandardDropout,
        Algorithm::GaussianDropout,
        Algorithm::VariationalDropout,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dqn => "dqn",
            Algorithm::StandardDropout => "standard-dropout",
            Algorithm::GaussianDropout => "gaussian-dropout",
            Algorithm::VariationalDropout => "variational-dropout",
        }
    }

    pub fn dropout_kind(self) -> Option<DropoutKind> {
        match self {
            Algorithm::Dqn => None,
            Algorithm::StandardDropout => Some(DropoutKind::Standard),
            Algorithm::GaussianDropout => Some(DropoutKind::Gaussian),
            Algorithm::VariationalDropout => Some(DropoutKind::Variational),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                format!(
                    "unknown algo '{s}' (expected one of dqn, standard-dropout, gaussian-dropout, variational-dropout)"
                )
            })
    }
}

/// Hyperparameters of one DQN trial.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub gamma: f64,
    pub lr: f64,
    pub batch_size: usize,
    /// Target network sync period C, in environment steps.
    pub target_sync_period: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: u64,
    pub replay_capacity: usize,
    pub warmup_transitions: usize,
    pub episodes_per_trial: usize,
    /// K > 0 selects greedy actions from the mean of K noisy passes.
    pub mc_eval_samples: usize,
    pub hidden_sizes: Vec<usize>,
    pub input_dropout: f64,
    pub hidden_dropout: f64,
    /// Weight of the variational KL penalty relative to the TD loss.
    pub kl_weight: f64,
    /// Global-norm gradient clip; `None` disables clipping.
    pub grad_clip: Option<f64>,
    pub loss_ema: f64,
    /// Record the smoothed loss every this many training steps.
    pub loss_log_period: u64,
    /// Gridworld overestimation probe every this many episodes.
    pub eval_period: usize,
    pub adam: AdamConfig,
}

impl AgentConfig {
    pub fn for_env(env: EnvKind) -> Self {
        let (gamma, replay_capacity, episodes_per_trial) = match env {
            EnvKind::CartPole => (0.99, 10_000, 500),
            EnvKind::Gridworld => (0.9, 2_000, 300),
        };
        Self {
            gamma,
            lr: 1e-3,
            batch_size: 32,
            target_sync_period: 100,
            epsilon_start: 1.0,
            epsilon_end: 0.01,
            epsilon_decay_steps: 5_000,
            replay_capacity,
            warmup_transitions: 500,
            episodes_per_trial,
            mc_eval_samples: 0,
            hidden_sizes: vec![128, 128],
            input_dropout: 0.1,
            hidden_dropout: 0.2,
            kl_weight: 1e-4,
            grad_clip: Some(10.0),
            loss_ema: 0.99,
            loss_log_period: 10,
            eval_period: 1,
            adam: AdamConfig::default(),
        }
    }

    pub fn epsilon_schedule(&self) -> LinearSchedule {
        LinearSchedule::new(self.epsilon_start, self.epsilon_end, self.epsilon_decay_steps)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: &str| Err(Error::InvalidConfig(format!("{key}: {why}")));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma", "must lie in [0, 1]");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr", "must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive");
        }
        if self.target_sync_period == 0 {
            return bad("target_sync_period", "must be positive");
        }
        for (key, v) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(key, "must lie in [0, 1]");
            }
        }
        if self.epsilon_end > self.epsilon_start {
            return bad("epsilon_end", "must not exceed epsilon_start");
        }
        if self.replay_capacity == 0 {
            return bad("replay_capacity", "must be positive");
        }
        if self.warmup_transitions == 0 {
            return bad("warmup_transitions", "must be positive");
        }
        if self.warmup_transitions > self.replay_capacity {
            return bad("warmup_transitions", "exceeds replay_capacity");
        }
        if self.episodes_per_trial == 0 {
            return bad("episodes", "must be positive");
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return bad("hidden_sizes", "need at least one positive width");
        }
        for (key, p) in [("input_p", self.input_dropout), ("hidden_p", self.hidden_dropout)] {
            if !(0.0..1.0).contains(&p) {
                return bad(key, "must lie in [0, 1)");
            }
        }
        if !(self.kl_weight >= 0.0 && self.kl_weight.is_finite()) {
            return bad("kl_weight", "must be non-negative");
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return bad("grad_clip", "must be positive (0 disables)");
            }
        }
        if !(0.0..1.0).contains(&self.loss_ema) {
            return bad("loss_ema", "must lie in [0, 1)");
        }
        if self.loss_log_period == 0 || self.eval_period == 0 {
            return bad("loss_log_period/eval_period", "must be positive");
        }
        Ok(())
    }
}
