//! Derivation of per-stage seeds from one top-level seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Seed for the stage named `label`, derived from `root`.
pub fn derive(root: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(label.as_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}

pub fn rng(root: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(root, label))
}
