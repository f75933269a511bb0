//! Deterministic random streams.
//!
//! Every consumer of randomness derives its own ChaCha stream from a base
//! seed and a path of tags, so results never depend on evaluation order or
//! on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Component tags used as the first element of stream paths.
pub mod tag {
    pub const WORLD: u64 = 0x5752_4c44;
    pub const PROPAGATION: u64 = 0x5052_4f50;
    pub const ANNOTATOR: u64 = 0x414e_4e4f;
    pub const SELECTION: u64 = 0x5345_4c45;
    pub const POLICY: u64 = 0x504f_4c49;
    pub const TRAIN: u64 = 0x5452_4149;
    pub const EXPERIMENT: u64 = 0x4558_5052;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a path of tags into a new 64-bit seed.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

/// Opens the stream identified by `(base, path)`.
pub fn stream(base: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, path))
}
