//! Deterministic seed derivation. Every stochastic stage gets its own
//! ChaCha stream derived from one root seed so stages can be re-run alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Seed of the named substream of `root`.
pub fn substream_seed(root: u64, name: &str) -> u64 {
    splitmix64(root ^ splitmix64(fnv1a(name)))
}

/// Seed of the `index`-th child of `root`; used for per-simulation streams.
pub fn child_seed(root: u64, index: u64) -> u64 {
    splitmix64(splitmix64(root) ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
