//! Reproducible random streams.
//!
//! Every experiment derives its generators from a `(seed, run, replica)`
//! triple: the seed and run id fix the ChaCha key, the replica id selects one
//! of 2^64 disjoint streams under that key. Replicas can therefore be run in
//! any order, on any thread, and still reproduce bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for replica `replica` of run `run` under `seed`.
pub fn stream(seed: u64, run: u64, replica: u64) -> SimRng {
    let mut state = seed ^ run.rotate_left(32) ^ 0x5EED_0F_C0FFEE;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replica);
    rng
}

/// Uniform draw in the open interval (0, 1].
pub fn open_unit<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}
