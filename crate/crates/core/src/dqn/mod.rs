//! DQN agent: Q-network construction, ε-greedy acting, experience replay,
//! minibatch TD updates against a target network, and the per-trial loop.

pub mod agent;
pub mod config;
pub mod replay;
pub mod trial;

pub use agent::{compute_targets, dqn_loss_and_grad, q_network, select_action, sync_target, td_loss, train_step};
pub use config::{AgentConfig, Algorithm};
pub use replay::{ReplayBuffer, Transition};
pub use trial::{run_trial, trial_seed, GapPoint, LossPoint, TrialAbort, TrialLog};
