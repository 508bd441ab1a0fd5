use rand::Rng;

use crate::{DdpgError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// Fixed-capacity ring buffer; the oldest transition is overwritten once
/// full. Sampling is refused until the buffer has filled.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
    refused_samples: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            items: Vec::with_capacity(capacity),
            next: 0,
            refused_samples: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
    pub fn capacity(&self) -> usize {
        self.capacity
    }
    pub fn is_full(&self) -> bool {
        self.items.len() == self.capacity
    }
    /// Sample requests rejected because the buffer was not yet full.
    pub fn refused_samples(&self) -> usize {
        self.refused_samples
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// `n` transitions drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R, n: usize) -> Result<Vec<&Transition>> {
        if !self.is_full() {
            self.refused_samples += 1;
            return Err(DdpgError::ReplayNotFull {
                len: self.len(),
                capacity: self.capacity,
            });
        }
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..self.capacity)).collect();
        Ok(idx.into_iter().map(|i| &self.items[i]).collect())
    }
}
