//! Counter-based random substreams.
//!
//! Every generator is a ChaCha8 instance keyed by `(seed, domain, id)` and
//! positioned on stream `index`, so any draw can be regenerated without
//! replaying the ones before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Bootstrap multipliers.
pub const DOMAIN_MULTIPLIER: u64 = 0x6d75_6c74;
/// Simulated data.
pub const DOMAIN_DATA: u64 = 0x6461_7461;
/// Per-replication bootstrap seeds in experiments.
pub const DOMAIN_REPLICATION: u64 = 0x7265_706c;

/// One step of SplitMix64.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes `(seed, domain, id)` into a 64-bit value.
pub fn derive_seed(seed: u64, domain: u64, id: u64) -> u64 {
    let mut s = seed;
    let a = splitmix64(&mut s);
    let mut s = a ^ domain;
    let b = splitmix64(&mut s);
    let mut s = b ^ id;
    splitmix64(&mut s)
}

/// The generator for `(seed, domain, id)` on stream `index`.
pub fn substream(seed: u64, domain: u64, id: u64, index: u64) -> ChaCha8Rng {
    let mut state = derive_seed(seed, domain, id);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
