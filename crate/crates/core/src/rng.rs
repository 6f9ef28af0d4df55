//! Deterministic seed splitting. Every random stream in a run is derived
//! from the master seed plus a path of integer labels.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a label path.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(seed), |acc, &label| {
        splitmix64(acc ^ splitmix64(label))
    })
}

pub fn rng_for(seed: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

/// Stream labels, kept distinct so that streams never alias.
pub(crate) mod stream {
    pub const POPULATION: u64 = 1;
    pub const GRAPH: u64 = 2;
    pub const PERTURB: u64 = 3;
    pub const FEEDBACK: u64 = 4;
    pub const PROCESS: u64 = 5;
    pub const SOLVER: u64 = 6;
}
