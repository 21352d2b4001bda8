//! Deterministic splitmix64 generator with explicit state.
//!
//! Every random draw in this crate flows through [`SplitMix64`] so that a run
//! is a pure function of its seeds: same seeds, same bytes out, on every
//! platform. Not suitable for cryptography.

use serde::{Deserialize, Serialize};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer: full avalanche over 64 bits.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a root seed and a stream tag.
///
/// Used to split one experiment seed into per-purpose streams (environment
/// resets, action sampling, token sampling) without correlation between them.
#[inline]
pub fn derive_seed(root: u64, stream: u64) -> u64 {
    mix64(root.wrapping_add(mix64(stream.wrapping_add(GOLDEN_GAMMA))))
}

/// Counter-based splitmix64 PRNG. The whole generator state is one `u64`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform draw in `[0, n)`. Rejection sampling keeps the distribution
    /// exactly uniform for every `n`, not just powers of two.
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "next_below requires n > 0");
        let zone = (u64::MAX / n) * n;
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Uniform `f64` in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
