//! Seeded random streams.
//!
//! Every unit of work (population, replicate, method, imputation) gets its
//! own stream derived from the run seed and a path of indices, so results do
//! not depend on the order in which units are executed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `seed` and `path` into a single 64-bit key.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    let mut state = seed;
    let mut key = splitmix64(&mut state);
    for &p in path {
        state ^= p.wrapping_mul(0xD6E8_FEB8_6659_FD93).wrapping_add(key);
        key = splitmix64(&mut state);
    }
    key
}

pub fn substream(seed: u64, path: &[u64]) -> Stream {
    let mut state = derive_seed(seed, path);
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    Stream::from_seed(bytes)
}
