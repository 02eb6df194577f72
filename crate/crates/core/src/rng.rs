//! Reproducible random number streams.
//!
//! Every Monte Carlo replication owns a named PCG-64 stream derived from
//! `(seed, stream)` through SplitMix64. The mapping is pure integer
//! arithmetic, so identical inputs give identical streams on any platform,
//! and distinct stream ids select distinct PCG increments.

use rand_pcg::Pcg64;

/// Identifier of the generator family; recorded in output metadata so runs
/// can be replayed across machines.
pub const RNG_ALGORITHM: &str = "pcg64-xsl-rr-128/64 (splitmix64 seeding)";

/// SplitMix64 step, the conventional seed expander.
pub fn splitmix64(state: &mut u64) {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
}

fn splitmix64_next(state: &mut u64) -> u64 {
    splitmix64(state);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Build the PCG-64 generator for replication `stream` of a run seeded with
/// `seed`. State comes from the seed, the increment from the stream id, so
/// streams are independent sequences of one deterministic family.
pub fn stream_rng(seed: u64, stream: u64) -> Pcg64 {
    let mut s = seed;
    let state = ((splitmix64_next(&mut s) as u128) << 64) | splitmix64_next(&mut s) as u128;
    let mut t = stream.wrapping_add(0xA076_1D64_78BD_642F);
    let incr = ((splitmix64_next(&mut t) as u128) << 64) | splitmix64_next(&mut t) as u128;
    Pcg64::new(state, incr)
}
