//! Counter-based hashing used for every random quantity that must be
//! reproducible independently of evaluation order: edge weights and
//! per-replicate seeds.
//!
//! The mixer is the SplitMix64 output function (Steele, Lea & Flood):
//! add the golden-ratio increment, then two xor-shift-multiply rounds.

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of 64-bit words into one digest, starting from `seed`.
#[inline]
pub fn fold_words<I: IntoIterator<Item = u64>>(seed: u64, words: I) -> u64 {
    words.into_iter().fold(mix64(seed), |h, w| mix64(h ^ w))
}

/// Maps 64 random bits to a uniform in the open interval (0, 1).
///
/// Uses the top 52 bits plus a half-step offset: every output
/// `(k + 1/2) 2^-52` is exactly representable, so 0 and 1 are never produced.
#[inline]
pub fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Seed for replicate `index` of stream `stream` under `root`.
///
/// Depends only on the three inputs, never on how many seeds were drawn
/// before, so replicates can be scheduled in any order.
pub fn derive_seed(root: u64, stream: u64, index: u64) -> u64 {
    fold_words(root, [0x5EED_5EED_0000_0001, stream, index])
}
