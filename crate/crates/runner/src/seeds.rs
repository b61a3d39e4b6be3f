//! Seed splitting: the stream for a job labelled `label` under master seed
//! `s` is seeded with the first eight bytes (little endian) of
//! `SHA-256(s as 8 LE bytes || label as UTF-8)`, top bit cleared so that
//! every derived seed can be written back into a config file.

use sha2::{Digest, Sha256};

pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes")) & (u64::MAX >> 1)
}
