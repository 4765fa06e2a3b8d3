//! Mini-batch index sampling. Batches are emitted with sorted indices; the
//! per-epoch stream is derived from (seed, epoch) so any epoch can be
//! replayed independently.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStrategy {
    /// Shuffle all indices each epoch and cut consecutive batches; a final
    /// partial batch is dropped.
    EpochShuffle,
    /// Draw a fresh uniform sample of distinct indices for every iteration.
    UniformWithoutReplacement,
}

#[derive(Debug, Clone)]
pub struct BatchSampler {
    m: usize,
    batch_size: usize,
    strategy: SampleStrategy,
    seed: u64,
}

impl BatchSampler {
    pub fn new(m: usize, batch_size: usize, strategy: SampleStrategy, seed: u64) -> Result<Self> {
        if batch_size == 0 || batch_size > m {
            return Err(Error::Domain(format!(
                "batch size must be in [1, {m}], got {batch_size}"
            )));
        }
        Ok(Self { m, batch_size, strategy, seed })
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn dataset_size(&self) -> usize {
        self.m
    }

    /// Iterations that make up one epoch: `floor(M/B)` shuffled batches, or
    /// `ceil(M/B)` uniform draws so epoch counts stay comparable across
    /// regimes.
    pub fn iterations_per_epoch(&self) -> usize {
        match self.strategy {
            SampleStrategy::EpochShuffle => self.m / self.batch_size,
            SampleStrategy::UniformWithoutReplacement => self.m.div_ceil(self.batch_size),
        }
    }

    /// All batches of the given epoch, each a sorted list of distinct
    /// indices.
    pub fn epoch_batches(&self, epoch: u64) -> Vec<Vec<usize>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(epoch);
        match self.strategy {
            SampleStrategy::EpochShuffle => {
                let mut perm: Vec<usize> = (0..self.m).collect();
                perm.shuffle(&mut rng);
                let full = self.m / self.batch_size;
                (0..full)
                    .map(|i| {
                        let mut batch =
                            perm[i * self.batch_size..(i + 1) * self.batch_size].to_vec();
                        batch.sort_unstable();
                        batch
                    })
                    .collect()
            }
            SampleStrategy::UniformWithoutReplacement => {
                let iters = self.iterations_per_epoch();
                let mut scratch: Vec<usize> = (0..self.m).collect();
                (0..iters)
                    .map(|_| {
                        // Partial Fisher-Yates over the scratch permutation.
                        for i in 0..self.batch_size {
                            let j = rng.random_range(i..self.m);
                            scratch.swap(i, j);
                        }
                        let mut batch = scratch[..self.batch_size].to_vec();
                        batch.sort_unstable();
                        batch
                    })
                    .collect()
            }
        }
    }
}
