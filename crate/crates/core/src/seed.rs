//! Seed derivation. Every stochastic component gets its RNG from here so a
//! single experiment seed fans out to independent, reproducible streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type DetRng = ChaCha8Rng;

/// Derive a 64-bit seed from a base seed and a label such as a clip id.
pub fn derive(base: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update(label.as_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("sha256 digest is 32 bytes"))
}

pub fn rng(base: u64, label: &str) -> DetRng {
    ChaCha8Rng::seed_from_u64(derive(base, label))
}

/// Hex sha256 of arbitrary bytes; used for content-addressed cache keys.
pub fn content_hash(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}
