//! Experiment configuration: a flat `key = value` file plus command-line
//! overrides. Blank lines and `#` comments are ignored; unknown keys are
//! rejected by name.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dropq_core::dqn::{AgentConfig, Algorithm};
use dropq_core::envs::EnvKind;

use crate::error::CliError;

/// Every key the file format accepts.
pub const KEYS: &[&str] = &[
    "env",
    "algo",
    "trials",
    "seed",
    "jobs",
    "out_dir",
    "episodes",
    "gamma",
    "lr",
    "batch_size",
    "target_sync_period",
    "epsilon_start",
    "epsilon_end",
    "epsilon_decay_steps",
    "replay_capacity",
    "warmup_transitions",
    "mc_eval_samples",
    "hidden_sizes",
    "input_p",
    "hidden_p",
    "kl_weight",
    "grad_clip",
    "loss_ema",
    "loss_log_period",
    "eval_period",
    "adam_beta1",
    "adam_beta2",
    "adam_eps",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    /// One algorithm, or several run on matched seeds and compared against
    /// the first.
    pub algos: Vec<Algorithm>,
    pub trials: usize,
    pub master_seed: u64,
    /// Worker threads; `None` means `min(trials, available cores)`.
    pub jobs: Option<usize>,
    pub out_dir: PathBuf,
    pub agent: AgentConfig,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub env: Option<String>,
    pub algo: Option<String>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub episodes: Option<usize>,
    pub jobs: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

/// Parses `key = value` lines into a map, rejecting unknown and repeated
/// keys.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!("line {}: expected `key = value`, got `{line}`", n + 1))
        })?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(CliError::Config(format!("unknown key `{key}` (line {})", n + 1)));
        }
        if map.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(CliError::Config(format!("key `{key}` given twice")));
        }
    }
    Ok(map)
}

fn parse<V: FromStr>(key: &str, value: &str) -> Result<V, CliError>
where
    V::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Config(format!("{key}: cannot parse `{value}`: {e}")))
}

fn parse_list<V: FromStr>(key: &str, value: &str) -> Result<Vec<V>, CliError>
where
    V::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text, overrides)
    }

    pub fn from_text(text: &str, overrides: &Overrides) -> Result<Self, CliError> {
        Self::from_pairs(parse_pairs(text)?, overrides)
    }

    pub fn from_pairs(mut pairs: BTreeMap<String, String>, o: &Overrides) -> Result<Self, CliError> {
        let put = |pairs: &mut BTreeMap<String, String>, key: &str, v: Option<String>| {
            if let Some(v) = v {
                pairs.insert(key.to_string(), v);
            }
        };
        put(&mut pairs, "env", o.env.clone());
        put(&mut pairs, "algo", o.algo.clone());
        put(&mut pairs, "trials", o.trials.map(|v| v.to_string()));
        put(&mut pairs, "seed", o.seed.map(|v| v.to_string()));
        put(&mut pairs, "episodes", o.episodes.map(|v| v.to_string()));
        put(&mut pairs, "jobs", o.jobs.map(|v| v.to_string()));
        put(&mut pairs, "out_dir", o.out_dir.as_ref().map(|p| p.display().to_string()));

        let env: EnvKind = match pairs.get("env") {
            Some(v) => parse("env", v)?,
            None => return Err(CliError::Config("env: missing (cartpole or gridworld)".into())),
        };
        let mut cfg = ExperimentConfig {
            env,
            algos: vec![Algorithm::Dqn],
            trials: 10,
            master_seed: 0,
            jobs: None,
            out_dir: PathBuf::from("runs"),
            agent: AgentConfig::for_env(env),
        };
        for (key, value) in &pairs {
            cfg.apply(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, v: &str) -> Result<(), CliError> {
        let a = &mut self.agent;
        match key {
            "env" => {}
            "algo" => self.algos = parse_list(key, v)?,
            "trials" => self.trials = parse(key, v)?,
            "seed" => self.master_seed = parse(key, v)?,
            "jobs" => self.jobs = Some(parse(key, v)?),
            "out_dir" => self.out_dir = PathBuf::from(v),
            "episodes" => a.episodes_per_trial = parse(key, v)?,
            "gamma" => a.gamma = parse(key, v)?,
            "lr" => a.lr = parse(key, v)?,
            "batch_size" => a.batch_size = parse(key, v)?,
            "target_sync_period" => a.target_sync_period = parse(key, v)?,
            "epsilon_start" => a.epsilon_start = parse(key, v)?,
            "epsilon_end" => a.epsilon_end = parse(key, v)?,
            "epsilon_decay_steps" => a.epsilon_decay_steps = parse(key, v)?,
            "replay_capacity" => a.replay_capacity = parse(key, v)?,
            "warmup_transitions" => a.warmup_transitions = parse(key, v)?,
            "mc_eval_samples" => a.mc_eval_samples = parse(key, v)?,
            "hidden_sizes" => a.hidden_sizes = parse_list(key, v)?,
            "input_p" => a.input_dropout = parse(key, v)?,
            "hidden_p" => a.hidden_dropout = parse(key, v)?,
            "kl_weight" => a.kl_weight = parse(key, v)?,
            "grad_clip" => {
                let c: f64 = parse(key, v)?;
                a.grad_clip = (c != 0.0).then_some(c);
            }
            "loss_ema" => a.loss_ema = parse(key, v)?,
            "loss_log_period" => a.loss_log_period = parse(key, v)?,
            "eval_period" => a.eval_period = parse(key, v)?,
            "adam_beta1" => a.adam.beta1 = parse(key, v)?,
            "adam_beta2" => a.adam.beta2 = parse(key, v)?,
            "adam_eps" => a.adam.eps = parse(key, v)?,
            other => return Err(CliError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.trials == 0 {
            return Err(CliError::Config("trials: must be positive".into()));
        }
        if self.jobs == Some(0) {
            return Err(CliError::Config("jobs: must be positive".into()));
        }
        if self.algos.is_empty() {
            return Err(CliError::Config("algo: at least one algorithm required".into()));
        }
        for (i, a) in self.algos.iter().enumerate() {
            if self.algos[..i].contains(a) {
                return Err(CliError::Config(format!("algo: `{a}` listed twice")));
            }
        }
        let adam = &self.agent.adam;
        for (key, b) in [("adam_beta1", adam.beta1), ("adam_beta2", adam.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(CliError::Config(format!("{key}: must lie in [0, 1)")));
            }
        }
        if !(adam.eps > 0.0) {
            return Err(CliError::Config("adam_eps: must be positive".into()));
        }
        self.agent.validate().map_err(|e| match e {
            dropq_core::Error::InvalidConfig(msg) => CliError::Config(msg),
            other => CliError::Config(other.to_string()),
        })
    }

    /// The full effective configuration as `key = value` pairs, in the file
    /// format's key order. Loading the pairs back yields the same config.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let a = &self.agent;
        let join = |xs: Vec<String>| xs.join(",");
        let mut pairs = vec![
            ("env", self.env.name().to_string()),
            ("algo", join(self.algos.iter().map(|a| a.name().to_string()).collect())),
            ("trials", self.trials.to_string()),
            ("seed", self.master_seed.to_string()),
        ];
        if let Some(j) = self.jobs {
            pairs.push(("jobs", j.to_string()));
        }
        pairs.extend([
            ("out_dir", self.out_dir.display().to_string()),
            ("episodes", a.episodes_per_trial.to_string()),
            ("gamma", a.gamma.to_string()),
            ("lr", a.lr.to_string()),
            ("batch_size", a.batch_size.to_string()),
            ("target_sync_period", a.target_sync_period.to_string()),
            ("epsilon_start", a.epsilon_start.to_string()),
            ("epsilon_end", a.epsilon_end.to_string()),
            ("epsilon_decay_steps", a.epsilon_decay_steps.to_string()),
            ("replay_capacity", a.replay_capacity.to_string()),
            ("warmup_transitions", a.warmup_transitions.to_string()),
            ("mc_eval_samples", a.mc_eval_samples.to_string()),
            ("hidden_sizes", join(a.hidden_sizes.iter().map(|h| h.to_string()).collect())),
            ("input_p", a.input_dropout.to_string()),
            ("hidden_p", a.hidden_dropout.to_string()),
            ("kl_weight", a.kl_weight.to_string()),
            ("grad_clip", a.grad_clip.unwrap_or(0.0).to_string()),
            ("loss_ema", a.loss_ema.to_string()),
            ("loss_log_period", a.loss_log_period.to_string()),
            ("eval_period", a.eval_period.to_string()),
            ("adam_beta1", a.adam.beta1.to_string()),
            ("adam_beta2", a.adam.beta2.to_string()),
            ("adam_eps", a.adam.eps.to_string()),
        ]);
        pairs
    }

    pub fn to_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
