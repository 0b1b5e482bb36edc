//! Seeded index sampling, phantoms, noise models and flat binary I/O.

pub mod io;
pub mod noise;
pub mod phantom;
pub mod rng;

pub use io::{read_array, write_array, write_pgm, ArrayHeader};
pub use noise::{apply_noise, NoiseLevelSource, NoiseModel, NoiseSpec, NoisyDataset};
pub use phantom::{disc_phantom, shepp_logan, shepp_logan_with, PhantomTable};
pub use rng::CounterRng;

use crate::error::{Error, Result};

/// Draws the equation indices used at each iteration.
///
/// The batch for iteration `n` depends only on `(seed, N, N_b, n)`: it is
/// drawn from the stream `CounterRng::new(seed, n)`. Within a batch indices
/// are distinct; across iterations draws are independent. The sampler's
/// `position` is the next iteration it will serve from
/// [`IndexSampler::next_batch`]; cloning forks the stream at that point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSampler {
    seed: u64,
    equations: usize,
    batch_size: usize,
    position: u64,
}

impl IndexSampler {
    pub fn new(seed: u64, equations: usize, batch_size: usize) -> Result<Self> {
        if batch_size == 0 || batch_size > equations {
            return Err(Error::InvalidBatch { batch: batch_size, equations });
        }
        Ok(Self { seed, equations, batch_size, position: 0 })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn equations(&self) -> usize {
        self.equations
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn set_position(&mut self, position: u64) {
        self.position = position;
    }

    /// Batch for iteration `n`, in draw order.
    pub fn sample_batch(&self, n: u64) -> Vec<usize> {
        let mut rng = CounterRng::new(self.seed, n);
        let (big_n, nb) = (self.equations, self.batch_size);
        if nb == 1 {
            return vec![rng.below(big_n as u64) as usize];
        }
        if 2 * nb > big_n {
            // partial Fisher–Yates
            let mut pool: Vec<usize> = (0..big_n).collect();
            for k in 0..nb {
                let j = k + rng.below((big_n - k) as u64) as usize;
                pool.swap(k, j);
            }
            pool.truncate(nb);
            return pool;
        }
        let mut out = Vec::with_capacity(nb);
        while out.len() < nb {
            let i = rng.below(big_n as u64) as usize;
            if !out.contains(&i) {
                out.push(i);
            }
        }
        out
    }

    /// Batch at the current position, then advances.
    pub fn next_batch(&mut self) -> Vec<usize> {
        let b = self.sample_batch(self.position);
        self.position += 1;
        b
    }
}
