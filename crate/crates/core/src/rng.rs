//! Seeded random streams.
//!
//! All randomness derives from a single `u64` seed. Independent substreams
//! are obtained by hashing a label (and optional index) into a ChaCha stream
//! id, so parallel work items draw from disjoint sequences regardless of
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// FNV-1a over the label bytes followed by the index.
fn label_hash(label: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes().chain(index.to_le_bytes()) {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Generator for the main stream of `seed`.
pub fn from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for the substream identified by `(label, index)`.
pub fn substream(seed: u64, label: &str, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label_hash(label, index));
    rng
}

/// Derives a child seed, for APIs that take a plain `u64`.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    label_hash(label, index) ^ seed.rotate_left(17)
}
