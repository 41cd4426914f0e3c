//! Stable sub-seed derivation.
//!
//! Every random choice in the crate flows from one master seed through this
//! function, so runs are reproducible across machines and thread schedules.
//! The derivation is SHA-256 over a domain tag, the little-endian master
//! seed and the `\xff`-separated path parts, truncated to the first eight
//! bytes (little-endian).

use sha2::{Digest, Sha256};

/// Derives the seed for a named sub-task, e.g.
/// `derive_seed(seed, &["cell", "Ethereum", "kmeans", "2"])`.
pub fn derive_seed(master: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(b"marketbn/seed/v1");
    hasher.update(master.to_le_bytes());
    for part in parts {
        hasher.update([0xff]);
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is long enough"))
}
