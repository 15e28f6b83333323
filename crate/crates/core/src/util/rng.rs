//! Counter-based random streams. Activation draws are keyed by
//! (seed, step, agent) so they are order-independent and replayable without
//! carrying RNG state through the simulation loop.

/// SplitMix64 finalizer; a full-period mixer over u64.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Mixes a chain of words into one key. Not commutative: mix(&[a, b]) differs
/// from mix(&[b, a]).
pub fn mix(words: &[u64]) -> u64 {
    let mut acc = 0x6a09e667f3bcc909; // sqrt(2) fractional bits, arbitrary non-zero start
    for &w in words {
        acc = splitmix64(acc ^ w);
    }
    acc
}

/// Uniform f64 in [0, 1) from the top 53 bits.
pub fn unit_f64(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Derives an independent sub-seed for a named stream (personas, graph, ...).
pub fn sub_seed(seed: u64, stream: &str) -> u64 {
    let mut acc = splitmix64(seed);
    for b in stream.bytes() {
        acc = splitmix64(acc ^ b as u64);
    }
    acc
}
