//! Reproducible random streams.
//!
//! Every Monte Carlo replicate gets its own [`RngStream`], derived from a
//! master seed by a path of integer labels (for example
//! `seed -> realization index -> dataset index`). Streams with distinct
//! paths are statistically independent and never share state, so the
//! result of a replicate does not depend on which thread runs it or in
//! what order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A position in the stream tree: a master seed plus a mixed path hash.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    seed: u64,
    path: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        Self { seed, path: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child key for label `index`. Children of distinct labels (and of
    /// distinct parents) map to distinct 256-bit ChaCha seeds.
    pub fn child(&self, index: u64) -> Self {
        let path = splitmix64(self.path ^ splitmix64(index.wrapping_add(0xA076_1D64_78BD_642F)));
        Self { seed: self.seed, path }
    }

    /// Convenience for a two-level path.
    pub fn child2(&self, a: u64, b: u64) -> Self {
        self.child(a).child(b)
    }

    pub fn stream(&self) -> RngStream {
        let mut bytes = [0u8; 32];
        let mut state = splitmix64(self.seed) ^ self.path.rotate_left(17);
        for chunk in bytes.chunks_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        RngStream(ChaCha8Rng::from_seed(bytes))
    }
}

/// Deterministic random number stream used by every sampler in the crate.
#[derive(Debug, Clone)]
pub struct RngStream(ChaCha8Rng);

impl RngStream {
    pub fn from_seed(seed: u64) -> Self {
        StreamKey::new(seed).stream()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}
