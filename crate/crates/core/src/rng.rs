//! Seed derivation for reproducible, order-independent random streams.
//!
//! Every learner in every replication owns one ChaCha8 stream. Its seed is
//! derived from the master seed by chaining SplitMix64 finalizers:
//!
//! ```text
//! s0   = mix(master)
//! s1   = mix(s0 ^ replication)
//! seed = mix(s1 ^ stream)
//! ```
//!
//! Mixing after each xor keeps `(replication, stream)` pairs from colliding
//! under index swaps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random stream type used across the simulator.
pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, replication: u64, stream: u64) -> u64 {
    let s0 = mix64(master);
    let s1 = mix64(s0 ^ replication);
    mix64(s1 ^ stream)
}

pub fn stream(master: u64, replication: u64, stream: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, replication, stream))
}

pub fn from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
