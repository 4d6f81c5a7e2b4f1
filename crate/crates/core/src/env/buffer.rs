use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};
use crate::guide::GuideOutput;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    /// False exactly when `next_state` is terminal. Time-limit truncation
    /// keeps this true so the target bootstraps.
    pub continues: bool,
    pub guide: Option<GuideOutput>,
}

/// Episode-structured replay with oldest-episode-first eviction.
///
/// `capacity` counts transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    episodes: VecDeque<Vec<Transition>>,
    len: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("replay capacity must be positive"));
        }
        Ok(Self {
            capacity,
            episodes: VecDeque::new(),
            len: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Number of stored transitions.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn episodes(&self) -> impl Iterator<Item = &[Transition]> {
        self.episodes.iter().map(Vec::as_slice)
    }

    pub fn transitions(&self) -> impl Iterator<Item = &Transition> {
        self.episodes.iter().flatten()
    }

    pub fn append(&mut self, episode: Vec<Transition>) -> Result<()> {
        if episode.is_empty() {
            return Ok(());
        }
        if episode.len() > self.capacity {
            return Err(Error::invalid(format!(
                "episode of {} transitions exceeds replay capacity {}",
                episode.len(),
                self.capacity
            )));
        }
        self.len += episode.len();
        self.episodes.push_back(episode);
        while self.len > self.capacity {
            let evicted = self.episodes.pop_front().expect("len > 0 implies an episode");
            self.len -= evicted.len();
        }
        Ok(())
    }

    fn candidate_count(&self, batch_length: usize) -> usize {
        self.episodes
            .iter()
            .filter(|e| e.len() >= batch_length)
            .map(|e| e.len() - batch_length + 1)
            .sum()
    }

    pub fn is_ready(&self, batch_length: usize) -> bool {
        batch_length > 0 && self.candidate_count(batch_length) > 0
    }

    /// Draws `batch_size` contiguous windows of `batch_length` transitions,
    /// each start position chosen uniformly among all valid ones.
    pub fn sample_batch<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        batch_length: usize,
        rng: &mut R,
    ) -> Result<Vec<&[Transition]>> {
        if batch_length == 0 || batch_size == 0 {
            return Err(Error::invalid("batch size and length must be positive"));
        }
        let total = self.candidate_count(batch_length);
        if total == 0 {
            return Err(Error::NotReady(format!(
                "no stored episode has {batch_length} transitions ({} stored)",
                self.len
            )));
        }
        let mut batch = Vec::with_capacity(batch_size);
        for _ in 0..batch_size {
            let mut pick = rng.random_range(0..total);
            for episode in self.episodes.iter().filter(|e| e.len() >= batch_length) {
                let starts = episode.len() - batch_length + 1;
                if pick < starts {
                    batch.push(&episode[pick..pick + batch_length]);
                    break;
                }
                pick -= starts;
            }
        }
        Ok(batch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn episode(tag: usize, len: usize) -> Vec<Transition> {
        (0..len)
            .map(|i| Transition {
                state: tag,
                action: i,
                reward: 0.0,
                next_state: tag,
                continues: true,
                guide: None,
            })
            .collect()
    }

    #[test]
    fn not_ready_until_long_enough() {
        let mut buf = ReplayBuffer::new(100).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(buf.sample_batch(2, 4, &mut rng), Err(Error::NotReady(_))));
        buf.append(episode(0, 3)).unwrap();
        assert!(!buf.is_ready(4));
        assert!(matches!(buf.sample_batch(2, 4, &mut rng), Err(Error::NotReady(_))));
    }

    #[test]
    fn single_candidate_fills_every_slot() {
        let mut buf = ReplayBuffer::new(100).unwrap();
        buf.append(episode(3, 16)).unwrap();
        let batch = buf.sample_batch(16, 16, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(batch.len(), 16);
        for window in batch {
            assert_eq!(window.len(), 16);
            assert_eq!(window[0].action, 0);
            assert_eq!(window[15].action, 15);
        }
    }

    #[test]
    fn eviction_is_oldest_first() {
        let mut buf = ReplayBuffer::new(10).unwrap();
        buf.append(episode(0, 4)).unwrap();
        buf.append(episode(1, 4)).unwrap();
        buf.append(episode(2, 4)).unwrap();
        assert!(buf.len() <= 10);
        let tags: Vec<usize> = buf.episodes().map(|e| e[0].state).collect();
        assert_eq!(tags, vec![1, 2]);
        assert!(buf.append(episode(9, 11)).is_err());
    }

    #[test]
    fn episode_selection_is_uniform() {
        let mut buf = ReplayBuffer::new(1000).unwrap();
        buf.append(episode(0, 20)).unwrap();
        buf.append(episode(1, 20)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let batch = buf.sample_batch(10_000, 8, &mut rng).unwrap();
        let first = batch.iter().filter(|w| w[0].state == 0).count() as f64 / 10_000.0;
        assert!((first - 0.5).abs() < 0.02, "{first}");
    }
}
