//! Seed derivation for reproducible, schedule-independent random streams.
//!
//! Every random stream in the toolkit is derived from a global seed plus a
//! stable key (document id, source label, row name, ...). Work items never
//! share a stream, so results do not depend on worker count or ordering.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// The random source used throughout the crate.
pub type SeededRng = ChaCha8Rng;

/// Derive an independent random stream from `seed` and a sequence of key parts.
pub fn derive_rng(seed: u64, parts: &[&str]) -> SeededRng {
    SeededRng::from_seed(derive_bytes(seed, parts))
}

/// Derive a 64-bit sub-seed, e.g. to hand to an adapter as an opaque option.
pub fn derive_seed(seed: u64, parts: &[&str]) -> u64 {
    let bytes = derive_bytes(seed, parts);
    u64::from_le_bytes(bytes[..8].try_into().expect("digest has 32 bytes"))
}

fn derive_bytes(seed: u64, parts: &[&str]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for part in parts {
        // length prefix keeps ("ab","c") and ("a","bc") apart
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    hasher.finalize().into()
}

/// Hex SHA-256 of a byte slice.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
