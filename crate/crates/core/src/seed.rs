//! Deterministic derivation of independent random streams.
//!
//! Every episode draws from its own stream keyed by the global seed and the
//! episode's coordinates, so results never depend on how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a path of coordinates into one 64-bit seed.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix(base), |acc, &p| splitmix(acc ^ splitmix(p)))
}

pub fn stream(base: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(base, path))
}

// Domain tags keep streams for different purposes apart.
pub(crate) const TAG_INIT: u64 = 0x1001;
pub(crate) const TAG_SHUFFLE: u64 = 0x1002;
pub(crate) const TAG_EPISODE: u64 = 0x1003;
pub(crate) const TAG_PREDICT: u64 = 0x1004;
pub(crate) const TAG_FOLDS: u64 = 0x1005;
pub(crate) const TAG_SYNTH: u64 = 0x1006;
