//! Keyed random streams.
//!
//! Every random decision in a run draws from a stream derived from
//! `(seed, round, worker, purpose)`. The key is hashed into a ChaCha8 seed,
//! so a stream depends only on its path and never on the order in which
//! workers are scheduled.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Worker slot used for server-side streams (sampling, data generation).
pub const SERVER: u64 = u64::MAX;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    round: u64,
    worker: u64,
    purpose: String,
    inner: ChaCha8Rng,
}

/// Opens the stream at path `(round, worker, purpose)` under `seed`.
pub fn stream(seed: u64, round: u64, worker: u64, purpose: &str) -> RngStream {
    RngStream::new(seed, round, worker, purpose)
}

impl RngStream {
    pub fn new(seed: u64, round: u64, worker: u64, purpose: &str) -> Self {
        let tag = fnv1a(purpose.as_bytes());
        let mut state = splitmix64(seed ^ 0x7465_726e_766f_7465);
        let mut key = [0u8; 32];
        for (chunk, word) in key.chunks_exact_mut(8).zip([seed, round, worker, tag]) {
            state = splitmix64(state ^ word);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        Self {
            seed,
            round,
            worker,
            purpose: purpose.to_owned(),
            inner: ChaCha8Rng::from_seed(key),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `(round, worker, purpose)`.
    pub fn path(&self) -> (u64, u64, &str) {
        (self.round, self.worker, &self.purpose)
    }

    /// A child stream keyed by this stream's path plus `sub`.
    pub fn fork(&self, sub: &str) -> RngStream {
        RngStream::new(self.seed, self.round, self.worker, &format!("{}/{sub}", self.purpose))
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}
