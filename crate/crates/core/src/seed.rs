//! Reproducible random streams.
//!
//! Every randomized operation works on a child stream whose seed is derived
//! from the user's global seed and the coordinates of the unit of work
//! (for example epoch and sentence id). The derivation is a chain of
//! SplitMix64 finalizers:
//!
//! ```text
//! h0   = mix(global)
//! h_i  = mix(h_{i-1} XOR mix(lane_i + 0x9E3779B97F4A7C15))
//! seed = h_n
//! ```
//!
//! The child stream is a ChaCha8 generator seeded with `seed`. Because a
//! sentence's stream depends only on its coordinates, results do not depend
//! on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seed used by every command when none is given.
pub const DEFAULT_SEED: u64 = 2019;

pub type StreamRng = ChaCha8Rng;

/// Distinguishes the streams of different procedures that share a seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Noise = 0x006e_6f69_7365,
    Testset = 0x0074_6573_7473,
    Embedding = 0x0065_6d62_6564,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(global: u64, lanes: &[u64]) -> u64 {
    lanes.iter().fold(mix64(global), |h, &lane| {
        mix64(h ^ mix64(lane.wrapping_add(GOLDEN)))
    })
}

pub fn stream(global: u64, domain: Domain, lanes: &[u64]) -> StreamRng {
    let mut all = Vec::with_capacity(lanes.len() + 1);
    all.push(domain as u64);
    all.extend_from_slice(lanes);
    ChaCha8Rng::seed_from_u64(derive_seed(global, &all))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn mix64_reference_values() {
        // SplitMix64 seeded with 0 produces mix64(GOLDEN) first.
        assert_eq!(mix64(GOLDEN), 0xE220_A839_7B1D_CDAF);
        assert_eq!(mix64(0), 0);
    }

    #[test]
    fn derivation_is_order_sensitive() {
        assert_ne!(derive_seed(7, &[1, 2]), derive_seed(7, &[2, 1]));
        assert_ne!(derive_seed(7, &[1]), derive_seed(8, &[1]));
        assert_eq!(derive_seed(7, &[1, 2]), derive_seed(7, &[1, 2]));
    }

    #[test]
    fn domains_separate_streams() {
        let mut a = stream(1, Domain::Noise, &[0, 0]);
        let mut b = stream(1, Domain::Testset, &[0, 0]);
        assert_ne!(a.next_u64(), b.next_u64());
    }
}
