//! Deterministic seed derivation for nested random streams.
//!
//! Every randomized routine derives per-purpose and per-index seeds from a
//! single user seed, so results are reproducible and independent of
//! evaluation order.

/// SplitMix64 mixing step: a full-avalanche permutation of the state.
pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for stream `stream`, element `index`, derived from the user seed.
pub(crate) fn sub_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed).wrapping_add(stream)).wrapping_add(index))
}

/// Stream tags keeping the derived streams disjoint.
pub(crate) mod stream {
    /// Data-generation draws.
    pub const DATA: u64 = 0x01;
    /// Random pair selection.
    pub const PAIR: u64 = 0x02;
    /// Monte Carlo proposals.
    pub const MC: u64 = 0x03;
    /// Sample splitting.
    pub const SPLIT: u64 = 0x04;
}
