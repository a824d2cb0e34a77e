//! Classic cart-pole balancing with explicit Euler integration.

use rand::Rng;

use super::{Environment, StepResult};
use crate::error::{Error, Result};

pub const GRAVITY: f64 = 9.8;
pub const CART_MASS: f64 = 1.0;
pub const POLE_MASS: f64 = 0.1;
/// Half the pole length.
pub const POLE_HALF_LENGTH: f64 = 0.5;
pub const FORCE_MAG: f64 = 10.0;
pub const TAU: f64 = 0.02;
pub const X_THRESHOLD: f64 = 2.4;
pub const THETA_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
pub const MAX_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl CartPoleState {
    pub fn out_of_bounds(&self) -> bool {
        self.x.abs() > X_THRESHOLD || self.theta.abs() > THETA_THRESHOLD
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.x, self.x_dot, self.theta, self.theta_dot]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CartPoleAction {
    Left,
    Right,
}

impl CartPoleAction {
    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Self::Left),
            1 => Some(Self::Right),
            _ => None,
        }
    }
}

/// Each component uniform in [-0.05, 0.05].
pub fn cartpole_reset<R: Rng + ?Sized>(rng: &mut R) -> CartPoleState {
    let mut draw = || rng.random_range(-0.05..=0.05);
    CartPoleState {
        x: draw(),
        x_dot: draw(),
        theta: draw(),
        theta_dot: draw(),
    }
}

/// One Euler step of the pole-on-cart equations under horizontal `force`.
pub fn cartpole_dynamics(s: CartPoleState, force: f64) -> CartPoleState {
    let total_mass = CART_MASS + POLE_MASS;
    let polemass_length = POLE_MASS * POLE_HALF_LENGTH;
    let (sin, cos) = s.theta.sin_cos();
    let temp = (force + polemass_length * s.theta_dot * s.theta_dot * sin) / total_mass;
    let theta_acc = (GRAVITY * sin - cos * temp)
        / (POLE_HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / total_mass));
    let x_acc = temp - polemass_length * theta_acc * cos / total_mass;
    CartPoleState {
        x: s.x + TAU * s.x_dot,
        x_dot: s.x_dot + TAU * x_acc,
        theta: s.theta + TAU * s.theta_dot,
        theta_dot: s.theta_dot + TAU * theta_acc,
    }
}

#[derive(Debug, Clone)]
pub struct CartPole {
    state: CartPoleState,
    steps: usize,
    done: bool,
    force_mag: f64,
    max_steps: usize,
}

impl Default for CartPole {
    fn default() -> Self {
        Self::new()
    }
}

impl CartPole {
    pub fn new() -> Self {
        Self {
            state: CartPoleState::default(),
            steps: 0,
            done: false,
            force_mag: FORCE_MAG,
            max_steps: MAX_STEPS,
        }
    }

    /// Overrides the push magnitude; zero leaves the pole unforced.
    pub fn with_force_mag(mut self, force_mag: f64) -> Self {
        self.force_mag = force_mag;
        self
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn state(&self) -> CartPoleState {
        self.state
    }

    /// Starts a fresh episode from `state`.
    pub fn set_state(&mut self, state: CartPoleState) {
        self.state = state;
        self.steps = 0;
        self.done = false;
    }

    pub fn step_action(&mut self, action: CartPoleAction) -> Result<StepResult> {
        if self.done {
            return Err(Error::Misuse("step on a terminated cart-pole episode".into()));
        }
        let force = match action {
            CartPoleAction::Right => self.force_mag,
            CartPoleAction::Left => -self.force_mag,
        };
        self.state = cartpole_dynamics(self.state, force);
        self.steps += 1;
        let failed = self.state.out_of_bounds();
        let capped = self.steps >= self.max_steps;
        self.done = failed || capped;
        Ok(StepResult {
            next_observation: self.state.to_vec(),
            reward: 1.0,
            terminal: self.done,
            truncated: capped && !failed,
        })
    }
}

impl Environment for CartPole {
    fn observation_dim(&self) -> usize {
        4
    }

    fn action_count(&self) -> usize {
        2
    }

    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<f64> {
        self.set_state(cartpole_reset(rng));
        self.state.to_vec()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        let a = CartPoleAction::from_index(action)
            .ok_or_else(|| Error::Misuse(format!("cart-pole action {action} out of range")))?;
        self.step_action(a)
    }
}
