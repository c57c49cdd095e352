//! Counter-based deterministic randomness.
//!
//! Every environment draw is a pure function of `(seed, arm, draw_index, lane)`,
//! so draws are order-independent: two policies that request the i-th pair of
//! question q see the same pair regardless of when they request it. This is
//! what makes common random numbers across policies work without storing any
//! sampler state.

/// SplitMix64 finalizer. Full-period bijection on u64.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a stream key by folding parts into the seed through `mix64`.
pub fn stream(seed: u64, parts: &[u64]) -> u64 {
    let mut z = mix64(seed);
    for &p in parts {
        z = mix64(z ^ p.wrapping_mul(0xd6e8_feb8_6659_fd93));
    }
    z
}

/// Uniform in (0, 1): uses the top 53 bits, offset so 0 is excluded
/// (Box-Muller takes a logarithm of this value).
#[inline]
pub fn unit_open(x: u64) -> f64 {
    (((x >> 11) as f64) + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

/// Uniform in [0, 1).
#[inline]
pub fn unit(x: u64) -> f64 {
    ((x >> 11) as f64) * (1.0 / 9_007_199_254_740_992.0)
}

/// A standard normal via Box-Muller on two counter lanes.
///
/// One documented generation method is used everywhere so that derived
/// statistics are reproducible across platforms at stated tolerances.
pub fn standard_normal(key: u64, lane: u64) -> f64 {
    let u1 = unit_open(mix64(key ^ lane.wrapping_mul(0xa076_1d64_78bd_642f)));
    let u2 = unit(mix64(key ^ lane.wrapping_mul(0xe703_7ed1_a0b4_28db) ^ 0x8fb8_41e8));
    let r = (-2.0 * u1.ln()).sqrt();
    r * (std::f64::consts::TAU * u2).cos()
}

/// Uniform integer in [0, n) by 128-bit multiply reduction.
#[inline]
pub fn bounded(x: u64, n: u64) -> u64 {
    (((x as u128) * (n as u128)) >> 64) as u64
}
