//! Seeded, splittable random number generation.
//!
//! Every adaptive run owns a counter-based ChaCha generator addressed by
//! `(seed, stream)`. Replications of the same experiment share a seed and
//! differ only in the stream index, so they can execute concurrently in any
//! order and still reproduce bit-identically.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used by all runs.
pub type RunRng = ChaCha8Rng;

/// Address of an independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RunSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RunSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Instantiate the generator for this address.
    pub fn rng(&self) -> RunRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Derive a stable stream index from experiment-cell coordinates, so each
/// (cell, replication) pair owns a disjoint stream regardless of scheduling.
pub fn stream_id(parts: &[u64]) -> u64 {
    // SplitMix64 finalizer over a running combination.
    let mut acc: u64 = 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        acc = acc.wrapping_add(p).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        acc ^= acc >> 31;
    }
    acc
}

/// Small deterministic PRNG for internal bookkeeping (treap priorities).
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
}
