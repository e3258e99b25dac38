//! Deterministic seed derivation.
//!
//! Every stochastic component (environment resets, exploration, DE, noise
//! baselines) draws from its own stream derived from one base seed, so runs
//! are reproducible and adding draws to one component never shifts another.

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent seed from `base` for the stream named `label`,
/// at position `index` within that stream.
pub fn derive_seed(base: u64, label: &str, index: u64) -> u64 {
    let mut h = base;
    for byte in label.as_bytes() {
        h = splitmix64(h ^ u64::from(*byte));
    }
    splitmix64(h ^ index)
}
