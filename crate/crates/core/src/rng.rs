//! Seed plumbing.
//!
//! Every random draw in the crate flows through a ChaCha stream keyed by a
//! master seed and a stream label, so that components (score fitting, tie
//! breaking, replicates) can be reproduced independently of each other.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Points;

/// SplitMix64 finalizer. A bijection on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn label_hash(label: &str) -> u64 {
    // FNV-1a
    label
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
        })
}

/// Derive a child seed from `(seed, label, index)`.
///
/// For a fixed `(seed, label)` the map `index -> seed` is injective.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    let base = mix64(seed ^ mix64(label_hash(label)));
    mix64(base.wrapping_add(index))
}

/// RNG for the stream `(seed, label)`.
pub fn stream(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, label, 0))
}

/// RNG for the `index`-th member of the stream family `(seed, label)`.
pub fn indexed_stream(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, label, index))
}

fn row_hash(row: &[f64]) -> u64 {
    row.iter()
        .fold(0x51_7cc1_b727_220au64, |h, &v| mix64(h ^ canonical_bits(v)))
}

fn canonical_bits(v: f64) -> u64 {
    // -0.0 and 0.0 compare equal, so they must hash equal.
    if v == 0.0 {
        0
    } else {
        v.to_bits()
    }
}

/// Hash of the multiset of rows: independent of row order.
pub fn multiset_hash(points: &Points) -> u64 {
    points
        .rows()
        .fold(points.dim() as u64, |acc, r| acc.wrapping_add(mix64(row_hash(r))))
}

/// Hash of a multiset of scalars: independent of order.
pub fn scalar_multiset_hash(values: &[f64]) -> u64 {
    values
        .iter()
        .fold(values.len() as u64, |acc, &v| acc.wrapping_add(mix64(canonical_bits(v))))
}
