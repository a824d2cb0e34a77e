//! Seedable CartPole and the 5×5 goal-seeking Gridworld.

pub mod cartpole;
pub mod gridworld;

use rand::Rng;

use crate::error::Result;

pub use cartpole::{CartPole, CartPoleAction, CartPoleState};
pub use gridworld::{GridAction, GridState, GridWorld};

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_observation: Vec<f64>,
    pub reward: f64,
    /// Episode over, either by the environment's own rule or the step cap.
    pub terminal: bool,
    /// Set when the episode ended only because of the step cap.
    pub truncated: bool,
}

pub trait Environment {
    fn observation_dim(&self) -> usize;

    fn action_count(&self) -> usize;

    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<f64>;

    fn step(&mut self, action: usize) -> Result<StepResult>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    CartPole,
    Gridworld,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::CartPole => "cartpole",
            EnvKind::Gridworld => "gridworld",
        }
    }
}

impl std::str::FromStr for EnvKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cartpole" => Ok(EnvKind::CartPole),
            "gridworld" => Ok(EnvKind::Gridworld),
            other => Err(format!("unknown env '{other}' (expected cartpole or gridworld)")),
        }
    }
}
