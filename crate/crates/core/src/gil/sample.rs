use crate::error::{GilError, Result};
use serde::{Deserialize, Serialize};

/// One cell: expressed genes (strictly increasing indices) with their values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpressionSample {
    pub id: u64,
    #[serde(rename = "genes")]
    pub gene_indices: Vec<usize>,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
}

impl ExpressionSample {
    pub fn new(id: u64, gene_indices: Vec<usize>, values: Vec<f64>, label: Option<usize>) -> Result<Self> {
        let s = Self { id, gene_indices, values, label };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.gene_indices.len() != self.values.len() {
            return Err(GilError::Data(format!(
                "sample {}: {} genes but {} values",
                self.id,
                self.gene_indices.len(),
                self.values.len()
            )));
        }
        if self.gene_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GilError::Data(format!("sample {}: gene indices must be strictly increasing", self.id)));
        }
        if self.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(GilError::Data(format!("sample {}: values must be finite and non-negative", self.id)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.gene_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gene_indices.is_empty()
    }

    /// Keeps the pairs at `positions` (any order), re-sorted by gene index.
    pub fn select(&self, positions: &[usize]) -> ExpressionSample {
        let mut keep = positions.to_vec();
        keep.sort_unstable();
        ExpressionSample {
            id: self.id,
            gene_indices: keep.iter().map(|&p| self.gene_indices[p]).collect(),
            values: keep.iter().map(|&p| self.values[p]).collect(),
            label: self.label,
        }
    }

    pub fn value_of(&self, gene: usize) -> Option<f64> {
        self.gene_indices.binary_search(&gene).ok().map(|p| self.values[p])
    }
}
