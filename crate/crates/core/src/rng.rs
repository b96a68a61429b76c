//! Seed derivation.
//!
//! Every random decision in the crate draws from a ChaCha stream derived from
//! one user-facing 64-bit seed, a purpose tag and a counter (episode index,
//! class index, ...). Streams with distinct `(tag, counter)` never overlap and
//! do not depend on the order in which they are requested.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TAG_SYNTH: u64 = 0x5359_4e54;
pub const TAG_EPISODE: u64 = 0x4550_4953;
pub const TAG_METHOD: u64 = 0x4d45_5448;
pub const TAG_SUBSAMPLE: u64 = 0x5355_4253;
pub const TAG_OUTLIER: u64 = 0x4f55_544c;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derive a child seed; used when a callee takes a plain `u64` seed.
pub fn derive_seed(seed: u64, tag: u64, counter: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(tag)) ^ counter)
}

/// Independent generator for `(seed, tag, counter)`.
pub fn stream(seed: u64, tag: u64, counter: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(tag)));
    rng.set_stream(counter);
    rng
}
