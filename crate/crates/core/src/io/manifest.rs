use super::config::ExperimentConfig;
use super::files::write_atomic;
use crate::error::{GilError, Result};
use crate::rng::sha256_hex;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const MANIFEST_VERSION: u32 = 1;

/// `run/<id>/manifest.json`: enough to reproduce the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub format_version: u32,
    pub run_id: String,
    pub strategy: String,
    pub seed: u64,
    /// Resolved configuration, seed override applied.
    pub config: ExperimentConfig,
    /// Input file name → sha256.
    pub inputs: BTreeMap<String, String>,
    /// Stage → hash of its training sample ids.
    pub train_ids: BTreeMap<usize, String>,
    /// Stage → sha256 of its checkpoint file.
    pub checkpoints: BTreeMap<usize, String>,
}

/// Order-independent digest of a set of sample ids.
pub fn hash_ids(ids: &[u64]) -> String {
    let mut sorted = ids.to_vec();
    sorted.sort_unstable();
    let bytes: Vec<u8> = sorted.iter().flat_map(|id| id.to_le_bytes()).collect();
    sha256_hex(&bytes)
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let m: Self = serde_json::from_str(&text).map_err(|e| GilError::Data(format!("{}: {e}", path.display())))?;
        if m.format_version != MANIFEST_VERSION {
            return Err(GilError::Data(format!("manifest version {}", m.format_version)));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_hash_ignores_order() {
        assert_eq!(hash_ids(&[3, 1, 2]), hash_ids(&[1, 2, 3]));
        assert_ne!(hash_ids(&[1, 2]), hash_ids(&[1, 2, 3]));
    }

    #[test]
    fn manifest_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let m = RunManifest {
            format_version: MANIFEST_VERSION,
            run_id: "x".into(),
            strategy: "baseline".into(),
            seed: 3,
            config: ExperimentConfig::default(),
            inputs: BTreeMap::from([("plan.json".into(), "ab".into())]),
            train_ids: BTreeMap::from([(1, hash_ids(&[1]))]),
            checkpoints: BTreeMap::new(),
        };
        let p = dir.path().join("manifest.json");
        m.save(&p).unwrap();
        assert_eq!(RunManifest::load(&p).unwrap(), m);
    }
}
