//! Update sequences: which transmitter moves at each step.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UpdateSchedule {
    /// Links `0, 1, ..., N-1, 0, 1, ...`.
    RoundRobin,
    /// I.i.d. uniform choice of link at every step.
    UniformRandom { seed: u64 },
}

impl UpdateSchedule {
    pub fn sequence(&self, n_links: usize) -> UpdateSequence {
        assert!(n_links > 0);
        let rng = match *self {
            UpdateSchedule::RoundRobin => None,
            UpdateSchedule::UniformRandom { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        UpdateSequence { n_links, step: 0, rng }
    }
}

#[derive(Debug, Clone)]
pub struct UpdateSequence {
    n_links: usize,
    step: u64,
    rng: Option<ChaCha8Rng>,
}

impl Iterator for UpdateSequence {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        let link = match &mut self.rng {
            None => (self.step % self.n_links as u64) as usize,
            Some(rng) => rng.gen_range(0..self.n_links),
        };
        self.step += 1;
        Some(link)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_robin_cycles() {
        let s: Vec<_> = UpdateSchedule::RoundRobin.sequence(3).take(7).collect();
        assert_eq!(s, vec![0, 1, 2, 0, 1, 2, 0]);
    }

    #[test]
    fn uniform_is_reproducible_and_covers_links() {
        let a: Vec<_> = UpdateSchedule::UniformRandom { seed: 9 }.sequence(4).take(2000).collect();
        let b: Vec<_> = UpdateSchedule::UniformRandom { seed: 9 }.sequence(4).take(2000).collect();
        assert_eq!(a, b);
        for link in 0..4 {
            let share = a.iter().filter(|&&l| l == link).count() as f64 / 2000.0;
            assert!((share - 0.25).abs() < 0.04, "link {link} share {share}");
        }
    }
}
