//! Seeded random streams.
//!
//! Every stochastic site derives its own generator from
//! `sha256(seed, site, indices)`. Streams therefore never depend on how many
//! draws some other site made, which is what lets strategies that differ only
//! in one knob share data order and masks bit-for-bit.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Site names used across the crate. Kept in one place so that two sites can
/// never collide by accident.
pub mod site {
    pub const INIT: &str = "init";
    pub const SHUFFLE: &str = "shuffle";
    pub const MASK: &str = "mask";
    pub const REPLAY: &str = "replay";
    pub const STAGE_VIEW: &str = "stage_view";
    pub const EVAL_VIEW: &str = "eval_view";
    pub const EVAL_MASK: &str = "eval_mask";
    pub const DOWNSTREAM_VIEW: &str = "downstream_view";
    pub const PROBE_SPLIT: &str = "probe_split";
    pub const PROBE_SHUFFLE: &str = "probe_shuffle";
    pub const GENE_PARTITION: &str = "gene_partition";
    pub const DATA_PARTITION: &str = "data_partition";
    pub const GEN_MODULES: &str = "gen_modules";
    pub const GEN_GENES: &str = "gen_genes";
    pub const GEN_PRETRAIN: &str = "gen_pretrain";
    pub const GEN_PLANTED: &str = "gen_planted";
    pub const GEN_LABELS: &str = "gen_labels";
    pub const GEN_DOWNSTREAM: &str = "gen_downstream";
    pub const GRADCHECK: &str = "gradcheck";
}

pub fn stream(seed: u64, site: &str, indices: &[u64]) -> StreamRng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((site.len() as u64).to_le_bytes());
    hasher.update(site.as_bytes());
    for index in indices {
        hasher.update(index.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest[..32]);
    ChaCha8Rng::from_seed(key)
}

/// A single 64-bit draw from a derived stream; used as a sort key.
pub fn key(seed: u64, site: &str, indices: &[u64]) -> u64 {
    stream(seed, site, indices).next_u64()
}

/// Hex SHA-256 of a byte slice.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
