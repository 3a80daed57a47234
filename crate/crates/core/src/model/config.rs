use crate::error::{GilError, Result};
use serde::{Deserialize, Serialize};

/// Shape of the gene-expression transformer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_len: usize,
}

impl ModelConfig {
    /// Desk-scale default: 2 layers, 4 heads, width 64.
    pub fn desk(vocab_size: usize) -> Self {
        Self { vocab_size, d_model: 64, n_layers: 2, n_heads: 4, d_ff: 256, max_len: 512 }
    }

    /// Six layers, eight heads, width 256.
    pub fn reference(vocab_size: usize) -> Self {
        Self { vocab_size, d_model: 256, n_layers: 6, n_heads: 8, d_ff: 1024, max_len: 512 }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 {
            return Err(GilError::Config("vocab_size must be at least 1".into()));
        }
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return Err(GilError::Config(format!(
                "d_model {} must be a positive multiple of n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.max_len == 0 {
            return Err(GilError::Config("max_len must be at least 1".into()));
        }
        if self.d_ff == 0 {
            return Err(GilError::Config("d_ff must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::desk(2000)
    }
}
