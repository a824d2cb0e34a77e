use crate::envs::gridworld::{self, GridAction, GridState};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Finite deterministic MDP: `(s, a) → (s', r)`, with absorbing terminal
/// states whose value is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp<T> {
    n_states: usize,
    n_actions: usize,
    next: Vec<usize>,
    reward: Vec<T>,
    terminal: Vec<bool>,
    gamma: T,
}

impl<T: Scalar> TabularMdp<T> {
    /// `next` and `reward` are row-major `(state, action)` tables.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        next: Vec<usize>,
        reward: Vec<T>,
        terminal: Vec<bool>,
        gamma: T,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidConfig("MDP needs states and actions".into()));
        }
        let pairs = n_states * n_actions;
        for (len, what) in [(next.len(), pairs), (reward.len(), pairs), (terminal.len(), n_states)] {
            if len != what {
                return Err(Error::DimensionMismatch { expected: what, got: len });
            }
        }
        if let Some(bad) = next.iter().find(|&&s| s >= n_states) {
            return Err(Error::InvalidConfig(format!("transition to unknown state {bad}")));
        }
        if !reward.iter().all(|r| r.is_finite()) {
            return Err(Error::NonFinite("MDP reward".into()));
        }
        if !(gamma >= T::zero() && gamma <= T::one()) {
            return Err(Error::InvalidConfig("discount must lie in [0, 1]".into()));
        }
        Ok(Self {
            n_states,
            n_actions,
            next,
            reward,
            terminal,
            gamma,
        })
    }

    /// The 5×5 Gridworld, built by enumerating the environment's own
    /// transition function.
    pub fn gridworld(gamma: T) -> Result<Self> {
        let n_states = gridworld::STATE_COUNT;
        let n_actions = gridworld::ACTION_COUNT;
        let mut next = Vec::with_capacity(n_states * n_actions);
        let mut reward = Vec::with_capacity(n_states * n_actions);
        let mut terminal = Vec::with_capacity(n_states);
        for s in 0..n_states {
            let state = GridState::from_index(s).expect("index in range");
            terminal.push(state.is_goal());
            for a in GridAction::ALL {
                let (n, r) = gridworld::grid_transition(state, a);
                next.push(n.index());
                reward.push(T::lit(r));
            }
        }
        Self::new(n_states, n_actions, next, reward, terminal, gamma)
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn gamma(&self) -> T {
        self.gamma
    }

    #[inline]
    pub fn next_state(&self, s: usize, a: usize) -> usize {
        self.next[s * self.n_actions + a]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> T {
        self.reward[s * self.n_actions + a]
    }

    #[inline]
    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn non_terminal_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_states).filter(|&s| !self.terminal[s])
    }
}

/// `|S| x |A|` action-value table.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularQ<T> {
    n_states: usize,
    n_actions: usize,
    values: Vec<T>,
}

impl<T: Scalar> TabularQ<T> {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![T::zero(); n_states * n_actions],
        }
    }

    pub fn for_mdp(mdp: &TabularMdp<T>) -> Self {
        Self::zeros(mdp.n_states(), mdp.n_actions())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> T {
        self.values[s * self.n_actions + a]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, v: T) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[T] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn max_value(&self, s: usize) -> T {
        self.row(s)
            .iter()
            .copied()
            .fold(T::neg_infinity(), T::max)
    }

    /// Greedy action; ties go to the lowest index.
    pub fn greedy_action(&self, s: usize) -> usize {
        argmax(self.row(s))
    }

    /// Largest absolute entrywise difference.
    pub fn sup_distance(&self, other: &TabularQ<T>) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    /// One temporal-difference update
    /// `Q(s,a) += α (r + γ max_a' Q(s',a') − Q(s,a))`, bootstrapping 0 when
    /// `next` is `None` (terminal).
    pub fn td_update(&mut self, s: usize, a: usize, reward: T, next: Option<usize>, alpha: T, gamma: T) {
        let bootstrap = next.map_or(T::zero(), |n| self.max_value(n));
        let q = self.get(s, a);
        self.set(s, a, q + alpha * (reward + gamma * bootstrap - q));
    }
}

/// Index of the first maximum.
pub fn argmax<T: Scalar>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gridworld_mdp_shape() {
        let mdp = TabularMdp::<f64>::gridworld(0.9).unwrap();
        assert_eq!(mdp.n_states(), 25);
        assert_eq!(mdp.n_actions(), 4);
        assert!(mdp.is_terminal(0));
        assert_eq!(mdp.non_terminal_states().count(), 24);
        // (1,0) West → goal
        assert_eq!(mdp.next_state(1, GridAction::West.index()), 0);
        assert_eq!(mdp.reward(1, GridAction::West.index()), 1.0);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(TabularMdp::<f64>::new(1, 1, vec![1], vec![0.0], vec![false], 0.9).is_err());
        assert!(TabularMdp::<f64>::new(1, 1, vec![0], vec![0.0], vec![false], 1.5).is_err());
    }

    #[test]
    fn td_update_arithmetic() {
        let mut q = TabularQ::<f64>::zeros(25, 4);
        q.td_update(1, GridAction::West.index(), 1.0, None, 0.5, 0.9);
        assert_eq!(q.get(1, 3), 0.5);
        let before = q.clone();
        q.td_update(7, 2, -1.0, Some(8), 0.0, 0.9);
        assert_eq!(q, before);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.9]), 1);
        assert_eq!(argmax(&[-1.0, 2.0, 2.0]), 1);
    }
}
