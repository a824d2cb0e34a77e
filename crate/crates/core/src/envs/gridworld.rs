//! 5×5 deterministic Gridworld. `(0, 0)` is the bottom-left goal and
//! episodes start in the upper-right corner `(4, 4)`.

use rand::Rng;

use super::{Environment, StepResult};
use crate::error::{Error, Result};

pub const GRID_SIZE: usize = 5;
pub const STATE_COUNT: usize = GRID_SIZE * GRID_SIZE;
pub const ACTION_COUNT: usize = 4;
pub const MAX_STEPS: usize = 50;
pub const GOAL_REWARD: f64 = 1.0;
pub const STEP_REWARD: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridState {
    pub x: usize,
    pub y: usize,
}

impl GridState {
    pub const GOAL: GridState = GridState { x: 0, y: 0 };
    pub const START: GridState = GridState {
        x: GRID_SIZE - 1,
        y: GRID_SIZE - 1,
    };

    pub fn new(x: usize, y: usize) -> Result<Self> {
        if x >= GRID_SIZE || y >= GRID_SIZE {
            return Err(Error::InvalidConfig(format!("({x}, {y}) is off the grid")));
        }
        Ok(Self { x, y })
    }

    /// Row-major index `x + 5y`.
    #[inline]
    pub fn index(self) -> usize {
        self.x + GRID_SIZE * self.y
    }

    pub fn from_index(i: usize) -> Option<Self> {
        (i < STATE_COUNT).then_some(Self {
            x: i % GRID_SIZE,
            y: i / GRID_SIZE,
        })
    }

    pub fn is_goal(self) -> bool {
        self == Self::GOAL
    }

    /// 25-dimensional one-hot encoding.
    pub fn one_hot(self) -> Vec<f64> {
        let mut v = vec![0.0; STATE_COUNT];
        v[self.index()] = 1.0;
        v
    }

    pub fn manhattan_to_goal(self) -> usize {
        self.x + self.y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridAction {
    North,
    South,
    East,
    West,
}

impl GridAction {
    pub const ALL: [GridAction; ACTION_COUNT] = [
        GridAction::North,
        GridAction::South,
        GridAction::East,
        GridAction::West,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

pub fn grid_reset() -> GridState {
    GridState::START
}

/// Deterministic move with wall clamping. Reward depends on the landing
/// state: `+1` for the goal, `-1` otherwise.
pub fn grid_transition(s: GridState, a: GridAction) -> (GridState, f64) {
    let max = GRID_SIZE - 1;
    let next = match a {
        GridAction::North => GridState { x: s.x, y: (s.y + 1).min(max) },
        GridAction::South => GridState { x: s.x, y: s.y.saturating_sub(1) },
        GridAction::East => GridState { x: (s.x + 1).min(max), y: s.y },
        GridAction::West => GridState { x: s.x.saturating_sub(1), y: s.y },
    };
    let reward = if next.is_goal() { GOAL_REWARD } else { STEP_REWARD };
    (next, reward)
}

#[derive(Debug, Clone)]
pub struct GridWorld {
    state: GridState,
    steps: usize,
    max_steps: usize,
}

impl Default for GridWorld {
    fn default() -> Self {
        Self::new()
    }
}

impl GridWorld {
    pub fn new() -> Self {
        Self {
            state: grid_reset(),
            steps: 0,
            max_steps: MAX_STEPS,
        }
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn state(&self) -> GridState {
        self.state
    }

    /// Starts a fresh episode from `state`.
    pub fn set_state(&mut self, state: GridState) {
        self.state = state;
        self.steps = 0;
    }

    pub fn step_action(&mut self, action: GridAction) -> Result<StepResult> {
        if self.state.is_goal() {
            return Err(Error::Misuse("step from the goal state".into()));
        }
        if self.steps >= self.max_steps {
            return Err(Error::Misuse("step after the episode step cap".into()));
        }
        let (next, reward) = grid_transition(self.state, action);
        self.state = next;
        self.steps += 1;
        let at_goal = next.is_goal();
        let capped = self.steps >= self.max_steps;
        Ok(StepResult {
            next_observation: next.one_hot(),
            reward,
            terminal: at_goal || capped,
            truncated: capped && !at_goal,
        })
    }
}

impl Environment for GridWorld {
    fn observation_dim(&self) -> usize {
        STATE_COUNT
    }

    fn action_count(&self) -> usize {
        ACTION_COUNT
    }

    fn reset<R: Rng + ?Sized>(&mut self, _rng: &mut R) -> Vec<f64> {
        self.set_state(grid_reset());
        self.state.one_hot()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        let a = GridAction::from_index(action)
            .ok_or_else(|| Error::Misuse(format!("grid action {action} out of range")))?;
        self.step_action(a)
    }
}
