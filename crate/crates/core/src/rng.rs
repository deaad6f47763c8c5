//! Reproducible random-number streams.
//!
//! Every concurrent consumer (replica, oracle run, sampler) owns a stream
//! derived from `(master seed, purpose, replica index)`. Streams depend only
//! on those three values, never on scheduling, so any aggregation that sorts
//! by replica index is bit-reproducible for any worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Counter-based stream generator used throughout the crate.
pub type StreamRng = ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a64(s: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive the stream for `replica` within the scope named by `purpose`.
pub fn derive_rng(master_seed: u64, purpose: &str, replica: u64) -> StreamRng {
    let mut state = master_seed ^ fnv1a64(purpose);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replica);
    rng
}
