use rand::Rng;

use crate::error::{Error, Result};

/// One `(s, a, r, s', terminal)` experience.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<T> {
    pub obs: Vec<T>,
    pub action: usize,
    pub reward: T,
    pub next_obs: Vec<T>,
    /// True only when the environment itself ended the episode; time-limit
    /// truncations still bootstrap.
    pub terminal: bool,
}

/// Fixed-capacity ring of transitions with uniform sampling with
/// replacement.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: Vec<Transition<T>>,
    next: usize,
    inserted: u64,
}

impl<T: Clone> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("replay capacity must be >= 1".into()));
        }
        Ok(Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
            inserted: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Total number of pushes, including overwritten ones.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Appends, overwriting the oldest entry once full.
    pub fn push(&mut self, t: Transition<T>) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        self.inserted += 1;
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition<T>> {
        self.items.iter()
    }

    /// Uniform index draw with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.items.is_empty() {
            return Err(Error::Misuse("sampling from an empty replay buffer".into()));
        }
        Ok((0..n).map(|_| rng.random_range(0..self.items.len())).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&Transition<T>>> {
        Ok(self
            .sample_indices(n, rng)?
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }
}
