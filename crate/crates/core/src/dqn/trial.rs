use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::agent::{q_network, select_action, sync_target, train_step};
use super::config::{AgentConfig, Algorithm};
use super::replay::{ReplayBuffer, Transition};
use crate::envs::{CartPole, EnvKind, Environment, GridState, GridWorld};
use crate::error::{Error, Result};
use crate::nn::{AdamState, MlpNetwork};
use crate::oracle::{overestimation_gap, value_iteration, OverestimationGap, TabularMdp, TabularQ, DEFAULT_TOL};
use crate::scalar::Scalar;

// Independent ChaCha streams of one trial seed.
const STREAM_INIT: u64 = 0;
const STREAM_ENV: u64 = 1;
const STREAM_ACT: u64 = 2;
const STREAM_TRAIN: u64 = 3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `index` under `master`. Two algorithms run with the same
/// master seed see the same seed per trial index.
pub fn trial_seed(master: u64, index: usize) -> u64 {
    splitmix64(splitmix64(master) ^ index as u64)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossPoint {
    /// Environment step at which the training step ran.
    pub step: u64,
    pub ema_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapPoint {
    /// 0 before any episode, `k` after `k · eval_period` episodes.
    pub eval_epoch: usize,
    /// Training steps taken before the probe.
    pub train_steps: u64,
    pub gap: OverestimationGap,
}

/// Everything recorded during one seeded trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialLog {
    pub seed: u64,
    pub env: EnvKind,
    pub algo: Algorithm,
    /// Undiscounted return of each completed episode.
    pub scores: Vec<f64>,
    pub epsilon_at_end: Vec<f64>,
    pub loss: Vec<LossPoint>,
    /// Gridworld only.
    pub overestimation: Vec<GapPoint>,
    pub env_steps: u64,
    pub train_steps: u64,
}

impl TrialLog {
    fn new(seed: u64, env: EnvKind, algo: Algorithm) -> Self {
        Self {
            seed,
            env,
            algo,
            scores: Vec::new(),
            epsilon_at_end: Vec::new(),
            loss: Vec::new(),
            overestimation: Vec::new(),
            env_steps: 0,
            train_steps: 0,
        }
    }
}

/// A trial stopped early. `log` holds everything up to the failure.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialAbort {
    pub log: TrialLog,
    pub error: Error,
}

impl std::fmt::Display for TrialAbort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "trial aborted after {} episodes ({} env steps): {}",
            self.log.scores.len(),
            self.log.env_steps,
            self.error
        )
    }
}

impl std::error::Error for TrialAbort {}

struct GridProbe<T> {
    mdp: TabularMdp<T>,
    qstar: TabularQ<T>,
}

impl<T: Scalar> GridProbe<T> {
    fn new(gamma: f64) -> Result<Self> {
        let mdp = TabularMdp::gridworld(T::lit(gamma))?;
        let qstar = value_iteration(&mdp, T::lit(DEFAULT_TOL))?;
        Ok(Self { mdp, qstar })
    }

    fn measure(&self, net: &MlpNetwork<T>) -> Result<OverestimationGap> {
        overestimation_gap(net, &self.qstar, &self.mdp, |s| {
            GridState::from_index(s)
                .map(|g| g.one_hot().into_iter().map(T::lit).collect())
                .unwrap_or_default()
        })
    }
}

/// Runs `config.episodes_per_trial` episodes of `algo` on `env` from `seed`.
pub fn run_trial<T: Scalar>(
    env: EnvKind,
    algo: Algorithm,
    config: &AgentConfig,
    seed: u64,
) -> std::result::Result<TrialLog, TrialAbort> {
    let mut log = TrialLog::new(seed, env, algo);
    let outcome = match env {
        EnvKind::CartPole => drive::<T, _>(CartPole::new(), None, algo, config, &mut log),
        EnvKind::Gridworld => match GridProbe::<T>::new(config.gamma) {
            Ok(probe) => drive(GridWorld::new(), Some(probe), algo, config, &mut log),
            Err(e) => Err(e),
        },
    };
    match outcome {
        Ok(()) => Ok(log),
        Err(error) => Err(TrialAbort { log, error }),
    }
}

fn to_scalar<T: Scalar>(v: Vec<f64>) -> Vec<T> {
    v.into_iter().map(T::lit).collect()
}

fn drive<T: Scalar, E: Environment>(
    mut env: E,
    probe: Option<GridProbe<T>>,
    algo: Algorithm,
    config: &AgentConfig,
    log: &mut TrialLog,
) -> Result<()> {
    config.validate()?;
    let seed = log.seed;
    let (mut init_rng, mut env_rng) = (stream(seed, STREAM_INIT), stream(seed, STREAM_ENV));
    let (mut act_rng, mut train_rng) = (stream(seed, STREAM_ACT), stream(seed, STREAM_TRAIN));

    let n_actions = env.action_count();
    let mut net: MlpNetwork<T> =
        q_network(env.observation_dim(), n_actions, algo, config, &mut init_rng)?;
    let mut target = net.clone();
    let mut adam = AdamState::for_network(&net, config.adam);
    let mut buffer = ReplayBuffer::new(config.replay_capacity)?;
    let epsilon = config.epsilon_schedule();
    let mut ema: Option<f64> = None;

    if let Some(p) = &probe {
        log.overestimation.push(GapPoint {
            eval_epoch: 0,
            train_steps: 0,
            gap: p.measure(&net)?,
        });
    }

    for episode in 0..config.episodes_per_trial {
        let mut obs: Vec<T> = to_scalar(env.reset(&mut env_rng));
        let mut score = 0.0;
        loop {
            let eps = epsilon.value(log.env_steps);
            let action = select_action(&net, &obs, eps, &mut act_rng, config.mc_eval_samples)?;
            let out = env.step(action)?;
            score += out.reward;
            log.env_steps += 1;
            let next_obs: Vec<T> = to_scalar(out.next_observation);
            buffer.push(Transition {
                obs,
                action,
                reward: T::lit(out.reward),
                next_obs: next_obs.clone(),
                terminal: out.terminal && !out.truncated,
            });
            obs = next_obs;

            if buffer.len() >= config.warmup_transitions {
                let loss = train_step(&mut net, &target, &buffer, &mut adam, config, &mut train_rng)?
                    .as_f64();
                log.train_steps += 1;
                let smoothed = match ema {
                    None => loss,
                    Some(prev) => config.loss_ema * prev + (1.0 - config.loss_ema) * loss,
                };
                ema = Some(smoothed);
                if log.train_steps.is_multiple_of(config.loss_log_period) {
                    log.loss.push(LossPoint {
                        step: log.env_steps,
                        ema_loss: smoothed,
                    });
                }
            }
            if log.env_steps.is_multiple_of(config.target_sync_period) {
                sync_target(&net, &mut target)?;
            }
            if out.terminal {
                break;
            }
        }
        log.scores.push(score);
        log.epsilon_at_end.push(epsilon.value(log.env_steps));

        if let Some(p) = &probe {
            if (episode + 1) % config.eval_period == 0 {
                log.overestimation.push(GapPoint {
                    eval_epoch: (episode + 1) / config.eval_period,
                    train_steps: log.train_steps,
                    gap: p.measure(&net)?,
                });
            }
        }
    }
    Ok(())
}
