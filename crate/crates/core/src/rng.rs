//! Counter-based random streams: path `i` of run `(seed, stream_id)` always
//! sees the same numbers, whatever the worker count or schedule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for one path: the key is derived from `(seed, stream_id)`, the
/// ChaCha stream number is the path index.
pub fn path_rng(seed: u64, stream_id: u64, path_index: u64) -> ChaCha8Rng {
    let mut state = seed ^ stream_id.rotate_left(32) ^ 0x6A09_E667_F3BC_C908;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(path_index);
    rng
}

/// Derive a sub-seed for an independent component of a larger run.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut s = seed ^ tag.wrapping_mul(0xD1B5_4A32_D192_ED03);
    splitmix64(&mut s)
}
