//! Counter-based random streams.
//!
//! Every stochastic quantity is drawn from a ChaCha8 stream addressed by
//! `(seed, tag, index)`, so results never depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags separating the independent consumers of a seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Tag {
    Bootstrap = 1,
    Simulation = 2,
    Study = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed, e.g. one per Monte Carlo run.
pub fn derive_seed(seed: u64, tag: Tag, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(tag as u64)) ^ index)
}

/// Independent generator for `(seed, tag, index)`.
pub fn stream(seed: u64, tag: Tag, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(tag as u64)));
    rng.set_stream(index);
    rng
}
