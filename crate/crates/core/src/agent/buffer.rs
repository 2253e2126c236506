use std::collections::VecDeque;

use crate::error::{Error, Result};

pub const DEFAULT_BUFFER_CAPACITY: usize = 64;

/// One step as seen by the collecting policy `θᵏ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRecord {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
    /// `ln π_θᵏ(a|s)`.
    pub log_prob: f64,
    /// Entropy of `π_θᵏ(·|s)`, stored at collection time.
    pub entropy: f64,
    /// `V_θᵏ(s)` at collection time.
    pub value: f64,
}

/// Whole episodes in arrival order; the oldest episode is evicted once
/// `capacity` is reached.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    episodes: VecDeque<Vec<TransitionRecord>>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("buffer capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            episodes: VecDeque::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Appends an episode, returning the evicted one if the buffer was full.
    pub fn push_episode(&mut self, episode: Vec<TransitionRecord>) -> Option<Vec<TransitionRecord>> {
        let evicted = if self.episodes.len() == self.capacity {
            self.episodes.pop_front()
        } else {
            None
        };
        self.episodes.push_back(episode);
        evicted
    }

    pub fn episodes(&self) -> impl ExactSizeIterator<Item = &[TransitionRecord]> {
        self.episodes.iter().map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn transition_count(&self) -> usize {
        self.episodes.iter().map(Vec::len).sum()
    }

    pub fn clear(&mut self) {
        self.episodes.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ep(tag: f64, len: usize) -> Vec<TransitionRecord> {
        (0..len)
            .map(|i| TransitionRecord {
                state: vec![tag],
                action: i,
                reward: tag,
                next_state: vec![tag],
                done: i + 1 == len,
                log_prob: -1.0,
                entropy: 0.5,
                value: 0.0,
            })
            .collect()
    }

    #[test]
    fn fifo_eviction_keeps_episodes_whole() {
        let mut b = ReplayBuffer::new(2).unwrap();
        assert!(b.push_episode(ep(1.0, 3)).is_none());
        assert!(b.push_episode(ep(2.0, 1)).is_none());
        let evicted = b.push_episode(ep(3.0, 2)).unwrap();
        assert_eq!(evicted[0].reward, 1.0);
        let tags: Vec<f64> = b.episodes().map(|e| e[0].reward).collect();
        assert_eq!(tags, vec![2.0, 3.0]);
        assert_eq!(b.transition_count(), 3);
        for e in b.episodes() {
            assert!(e.iter().all(|t| t.reward == e[0].reward));
        }
    }

    #[test]
    fn zero_capacity_rejected() {
        assert!(ReplayBuffer::new(0).is_err());
    }
}
