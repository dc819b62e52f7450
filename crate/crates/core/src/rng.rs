//! Seeded randomness. Every random draw in the crate comes from ChaCha8 keyed
//! by one 64-bit seed; independent consumers take distinct stream ids, so
//! adding a consumer never shifts the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids of the crate's random consumers.
pub mod stream {
    pub const PROBES: u64 = 1;
    pub const VALUES: u64 = 2;
    pub const TRIALS: u64 = 3;
    pub const PLACEMENT: u64 = 4;
}

pub fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}
