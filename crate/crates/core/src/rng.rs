//! Seeded random numbers.
//!
//! All stochastic choices (tile placement, family assignment, orientations)
//! draw from ChaCha8 seeded with a single `u64`. ChaCha8 output is specified
//! bit-for-bit and independent of platform endianness or word size, so a run
//! replicates on any machine given the same seed.

use rand::SeedableRng;

pub type SimRng = rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
