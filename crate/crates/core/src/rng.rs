//! Reproducible random substreams.
//!
//! Every batch of every simulation owns one ChaCha8 stream selected by
//! `(seed, domain, index)`. The stream word is `domain << 48 | index`, so
//! the factor sampler and the CDO sampler never share draws even when run
//! with the same seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Which sampler a stream belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum StreamDomain {
    CcpFactors = 1,
    CdoLatent = 2,
    Auxiliary = 3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Substream {
    pub seed: u64,
    pub domain: StreamDomain,
    pub index: u64,
}

impl Substream {
    pub fn new(seed: u64, domain: StreamDomain, index: u64) -> Self {
        assert!(index < 1 << 48, "substream index out of range");
        Self { seed, domain, index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((self.domain as u64) << 48) | self.index);
        rng
    }
}

/// Splits `n_paths` into `n_batches` contiguous batch sizes; the first
/// `n_paths % n_batches` batches get one extra path.
pub fn batch_sizes(n_paths: usize, n_batches: usize) -> Vec<usize> {
    let base = n_paths / n_batches;
    let extra = n_paths % n_batches;
    (0..n_batches).map(|b| base + usize::from(b < extra)).collect()
}
