//! Seeding and the single PRNG algorithm used across the crate.
//!
//! Every random stream is a PCG-64 (`Lcg128Xsl64`) generator. Child seeds are
//! derived from a parent seed and a tag with SplitMix64 finalization, so a run
//! seed fans out into module seeds and those fan out into per-item seeds
//! without any two streams sharing state.

use rand::SeedableRng;
pub use rand_pcg::Pcg64;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the tag bytes; only used to turn stream names into integers.
fn tag_hash(tag: &str) -> u64 {
    tag.bytes().fold(0xCBF2_9CE4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Derive a child seed from `parent` for the named stream.
pub fn derive(parent: u64, tag: &str) -> u64 {
    mix64(parent ^ mix64(tag_hash(tag)))
}

/// Derive a child seed indexed by an integer (per-item streams).
pub fn derive_indexed(parent: u64, tag: &str, index: u64) -> u64 {
    mix64(derive(parent, tag) ^ mix64(index.wrapping_mul(GOLDEN)))
}

pub fn stream(seed: u64) -> Pcg64 {
    Pcg64::seed_from_u64(seed)
}
