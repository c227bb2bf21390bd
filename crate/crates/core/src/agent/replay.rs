//! Fixed-capacity FIFO experience replay.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;

/// Network input for one state. Consecutive transitions share these.
pub type StateVec<T> = Arc<[T]>;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition<T = f64> {
    pub state: StateVec<T>,
    pub action: usize,
    pub reward: T,
    pub next_state: StateVec<T>,
    /// No bootstrapping from `next_state`.
    pub terminal: bool,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer<T = f64> {
    capacity: usize,
    items: VecDeque<Transition<T>>,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
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

    /// Appends, evicting the oldest transition when full.
    pub fn push(&mut self, t: Transition<T>) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn get(&self, i: usize) -> Option<&Transition<T>> {
        self.items.get(i)
    }

    /// Uniform sample with replacement. Empty if the buffer is empty.
    pub fn sample<'a>(&'a self, n: usize, rng: &mut impl Rng) -> Vec<&'a Transition<T>> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n)
            .map(|_| &self.items[rng.gen_range(0..self.items.len())])
            .collect()
    }
}
