//! Deterministic seed derivation.
//!
//! Every random consumer in the workspace (scene generation, splitting,
//! weight init, epoch shuffling, dropout masks) receives its seed through
//! [`derive_seed`] from one master seed. The derivation is a splitmix64
//! chain over the master seed, a domain tag and an index, so adding a new
//! consumer or reordering calls never perturbs the streams of existing
//! consumers.

/// One splitmix64 step; also usable as a cheap 64-bit mixer.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed for `domain[index]` from `master`.
///
/// Identical `(master, domain, index)` always yields the same seed;
/// distinct domains or indices yield (with overwhelming probability)
/// unrelated seeds.
pub fn derive_seed(master: u64, domain: &str, index: u64) -> u64 {
    let mut state = master;
    let mut acc = splitmix64(&mut state);
    for &byte in domain.as_bytes() {
        state ^= u64::from(byte);
        acc ^= splitmix64(&mut state);
    }
    state ^= index;
    acc ^ splitmix64(&mut state)
}
