use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// How component indices are drawn each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerMode {
    /// Independent uniform draws with replacement.
    WithReplacement,
    /// A fresh permutation per epoch, consumed in order.
    EpochShuffle,
    /// Every component every step.
    FullBatch,
}

impl FromStr for SamplerMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "uniform" | "with_replacement" | "with_replacement_uniform" => Ok(SamplerMode::WithReplacement),
            "shuffle" | "epoch_shuffle" => Ok(SamplerMode::EpochShuffle),
            "full" | "full_batch" => Ok(SamplerMode::FullBatch),
            other => Err(format!("unknown sampler `{other}` (expected uniform, shuffle or full_batch)")),
        }
    }
}

impl fmt::Display for SamplerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerMode::WithReplacement => "uniform",
            SamplerMode::EpochShuffle => "shuffle",
            SamplerMode::FullBatch => "full_batch",
        })
    }
}

/// Seeded index generator. Uses its own ChaCha stream so that drawing the
/// starting point never shifts the sample sequence.
pub struct Sampler {
    mode: SamplerMode,
    n: usize,
    rng: ChaCha8Rng,
    batch: Vec<usize>,
    perm: Vec<usize>,
    cursor: usize,
}

impl Sampler {
    pub fn new(mode: SamplerMode, batch_size: usize, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::NoSamples);
        }
        if batch_size == 0 || batch_size > n {
            return Err(Error::invalid(format!("batch size {batch_size} must lie in [1, {n}]")));
        }
        let batch_size = if mode == SamplerMode::FullBatch { n } else { batch_size };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let batch = if mode == SamplerMode::FullBatch { (0..n).collect() } else { vec![0; batch_size] };
        Ok(Sampler { mode, n, rng, batch, perm: (0..n).collect(), cursor: n })
    }

    pub fn batch_size(&self) -> usize {
        self.batch.len()
    }

    pub fn next_batch(&mut self) -> &[usize] {
        match self.mode {
            SamplerMode::FullBatch => {}
            SamplerMode::WithReplacement => {
                for slot in self.batch.iter_mut() {
                    *slot = self.rng.random_range(0..self.n);
                }
            }
            SamplerMode::EpochShuffle => {
                for slot in 0..self.batch.len() {
                    if self.cursor == self.n {
                        self.perm.shuffle(&mut self.rng);
                        self.cursor = 0;
                    }
                    self.batch[slot] = self.perm[self.cursor];
                    self.cursor += 1;
                }
            }
        }
        &self.batch
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_frequencies() {
        let n = 10;
        let mut s = Sampler::new(SamplerMode::WithReplacement, 1, n, 42).unwrap();
        let mut counts = vec![0usize; n];
        let draws = 1_000_000;
        for _ in 0..draws {
            counts[s.next_batch()[0]] += 1;
        }
        let tol = 5.0 * (n as f64).sqrt() / 1e3;
        for c in counts {
            assert!((c as f64 / draws as f64 - 1.0 / n as f64).abs() <= tol);
        }
    }

    #[test]
    fn shuffle_covers_each_epoch() {
        let n = 7;
        let mut s = Sampler::new(SamplerMode::EpochShuffle, 1, n, 3).unwrap();
        for _ in 0..5 {
            let mut seen: Vec<usize> = (0..n).map(|_| s.next_batch()[0]).collect();
            seen.sort();
            assert_eq!(seen, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn full_batch_is_everything() {
        let mut s = Sampler::new(SamplerMode::FullBatch, 1, 4, 0).unwrap();
        assert_eq!(s.next_batch(), &[0, 1, 2, 3]);
        assert_eq!(s.batch_size(), 4);
    }

    #[test]
    fn batch_bounds() {
        assert!(Sampler::new(SamplerMode::WithReplacement, 5, 4, 0).is_err());
        assert!(Sampler::new(SamplerMode::WithReplacement, 0, 4, 0).is_err());
    }

    #[test]
    fn mode_names_round_trip() {
        for m in [SamplerMode::WithReplacement, SamplerMode::EpochShuffle, SamplerMode::FullBatch] {
            assert_eq!(m.to_string().parse::<SamplerMode>().unwrap(), m);
        }
        assert!("random".parse::<SamplerMode>().is_err());
    }
}
