//! Seed derivation.
//!
//! Every random stream is a ChaCha8 generator seeded from a root seed by a
//! fixed split tree:
//!
//! ```text
//! root
//! ├── INIT            model initialization
//! ├── TRAIN           rollouts and batch selection, one stream per run
//! ├── PROBE  ⊕ step   in-distribution success probes during training
//! ├── DATASET         puzzle selection for the splits
//! └── EVAL   ⊕ cell ⊕ puzzle ⊕ attempt
//! ```
//!
//! Children are derived with [`derive`], so every leaf is reproducible on its
//! own regardless of evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const INIT: u64 = 0x494e_4954;
pub const TRAIN: u64 = 0x5452_4149;
pub const PROBE: u64 = 0x5052_4f42;
pub const DATASET: u64 = 0x4441_5441;
pub const EVAL: u64 = 0x4556_414c;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn derive(parent: u64, label: u64) -> u64 {
    splitmix64(parent ^ splitmix64(label))
}

pub fn from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// FNV-1a, for turning small keys (puzzles, decode configs) into labels.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
