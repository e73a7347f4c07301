//! Labeled derivation of independent random streams from one run seed.
//!
//! Every stochastic stage (position jitter, bootstrap, permutation, k-means,
//! scenario generation) draws from its own stream keyed by a label and an
//! index or string key. Streams do not depend on evaluation order, so work
//! can be reordered or spread over threads without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn absorb(mut h: u64, bytes: &[u8]) -> u64 {
    for chunk in bytes.chunks(8) {
        let mut word = [0u8; 8];
        word[..chunk.len()].copy_from_slice(chunk);
        h = splitmix64(h ^ u64::from_le_bytes(word));
    }
    // length terminator so "ab" + "" and "a" + "b" differ
    splitmix64(h ^ (bytes.len() as u64).rotate_left(32))
}

/// Derive a 64-bit seed for `(seed, label, index)`.
pub fn derive(seed: u64, label: &str, index: u64) -> u64 {
    let h = absorb(splitmix64(seed), label.as_bytes());
    splitmix64(h ^ splitmix64(index))
}

/// Derive a 64-bit seed for `(seed, label, key)` with a string key.
pub fn derive_keyed(seed: u64, label: &str, key: &str) -> u64 {
    let h = absorb(splitmix64(seed), label.as_bytes());
    absorb(h, key.as_bytes())
}

pub fn stream(seed: u64, label: &str, index: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(derive(seed, label, index))
}

pub fn keyed_stream(seed: u64, label: &str, key: &str) -> Stream {
    ChaCha8Rng::seed_from_u64(derive_keyed(seed, label, key))
}
