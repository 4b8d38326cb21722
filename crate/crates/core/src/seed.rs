//! Seed derivation. Every random choice in a run is drawn from a stream
//! keyed by (experiment seed, purpose, index) so that components stay
//! reproducible independently of the order in which they are built.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a base seed with a purpose tag and an index into a new seed.
pub fn derive(seed: u64, purpose: &str, index: u64) -> u64 {
    let mut h = splitmix(seed);
    for b in purpose.bytes() {
        h = splitmix(h ^ u64::from(b));
    }
    splitmix(h ^ index)
}

pub fn rng(seed: u64, purpose: &str, index: u64) -> Rng {
    Rng::seed_from_u64(derive(seed, purpose, index))
}
