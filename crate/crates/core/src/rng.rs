//! Seed derivation.
//!
//! Every random draw in the pipeline comes from a ChaCha8 stream whose seed is
//! derived from a master seed and a list of integer coordinates, so serial and
//! parallel runs see exactly the same streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `coords` into `master`. Distinct coordinate lists give unrelated seeds.
pub fn derive_seed(master: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(master), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

pub fn rng_from(master: u64, coords: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, coords))
}

/// Stream tags used as the first coordinate.
pub(crate) mod stream {
    pub const SAMPLE: u64 = 1;
    pub const FOLDS: u64 = 2;
    pub const SYNTH: u64 = 3;
}
