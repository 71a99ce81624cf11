use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tracker::StateVector;

#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: StateVector,
    pub action: usize,
    pub reward: f64,
    pub next_state: StateVector,
    pub done: bool,
}

impl Experience {
    pub fn is_positive(&self) -> bool {
        self.reward > 0.0
    }
}

/// Bounded FIFO of experiences. Pushing past capacity evicts the oldest.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    entries: VecDeque<Experience>,
    capacity: usize,
    positive_count: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        ReplayBuffer {
            entries: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
            positive_count: 0,
        }
    }

    pub fn push(&mut self, e: Experience) {
        if self.entries.len() == self.capacity {
            if let Some(old) = self.entries.pop_front() {
                if old.is_positive() {
                    self.positive_count -= 1;
                }
            }
        }
        if e.is_positive() {
            self.positive_count += 1;
        }
        self.entries.push_back(e);
    }

    /// `n` draws, uniform with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&Experience>> {
        if self.entries.len() < n || self.entries.is_empty() {
            return Err(Error::BufferTooSmall {
                len: self.entries.len(),
                requested: n,
            });
        }
        Ok((0..n)
            .map(|_| &self.entries[rng.gen_range(0..self.entries.len())])
            .collect())
    }

    pub fn flush(&mut self) {
        self.entries.clear();
        self.positive_count = 0;
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn positive_count(&self) -> usize {
        self.positive_count
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.entries.iter()
    }
}
