//! Deep Q-learning with standard, Gaussian and variational dropout, built on
//! a small dense-network core with hand-written gradients.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which the experiments use.

pub mod dqn;
pub mod envs;
pub mod error;
pub mod matrix;
pub mod nn;
pub mod oracle;
pub mod scalar;
pub mod schedule;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Mlp = nn::MlpNetwork<f64>;
pub type Mlp32 = nn::MlpNetwork<f32>;
pub type Adam = nn::AdamState<f64>;
pub type Batch = matrix::Matrix<f64>;
pub type Mdp = oracle::TabularMdp<f64>;
pub type QTable = oracle::TabularQ<f64>;
pub type Replay = dqn::ReplayBuffer<f64>;
