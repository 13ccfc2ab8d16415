//! Seeded random stream.
//!
//! The generator is SplitMix64 (Steele, Lea & Flood 2014):
//!
//! ```text
//! state  = state + 0x9E37_79B9_7F4A_7C15        (wrapping)
//! z      = state
//! z      = (z ^ (z >> 30)) * 0xBF58_476D_1CE4_E5B9 (wrapping)
//! z      = (z ^ (z >> 27)) * 0x94D0_49BB_1331_11EB (wrapping)
//! output = z ^ (z >> 31)
//! ```
//!
//! Only integer arithmetic is involved, so a seed yields the same sequence on
//! every platform. `next_u32` returns the high 32 bits of `next_u64`.
//! Distributions come from `rand`/`rand_distr` on top of this stream.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_2: u64 = 0x94D0_49BB_1331_11EB;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    state: u64,
}

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_2);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, state: seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream keyed by `tag`, stable for a given parent seed.
    pub fn derive(&self, tag: u64) -> Self {
        Self::new(mix(self.seed ^ mix(tag.wrapping_add(GOLDEN_GAMMA))))
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        let z: f64 = StandardNormal.sample(self);
        mean + std * z
    }

    /// Uniform index in `0..n` (Lemire's multiply-shift, slight bias < 2^-32 for small n).
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index range must be non-empty");
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}
