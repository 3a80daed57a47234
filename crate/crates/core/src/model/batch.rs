use super::mask::{mask_positions, MaskSpec};
use crate::error::{GilError, Result};
use crate::gil::ExpressionSample;
use crate::numerics::Segment;
use rand::Rng;

/// A padded `B×L` batch of (gene, value) rows.
///
/// `input_values` is what the model sees (the masked values ṽ); `values`
/// holds the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub batch_size: usize,
    pub seq_len: usize,
    pub gene_indices: Vec<usize>,
    pub values: Vec<f64>,
    pub input_values: Vec<f64>,
    pub pad_mask: Vec<bool>,
    pub masked: Vec<bool>,
}

impl Batch {
    pub fn from_rows(genes: Vec<Vec<usize>>, values: Vec<Vec<f64>>) -> Result<Self> {
        for (r, row) in genes.iter().enumerate() {
            let mut sorted = row.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(GilError::Data(format!("batch row {r} repeats a gene")));
            }
        }
        Self::from_rows_allow_duplicates(genes, values)
    }

    /// Like [`Batch::from_rows`] without the distinct-gene check.
    pub fn from_rows_allow_duplicates(genes: Vec<Vec<usize>>, values: Vec<Vec<f64>>) -> Result<Self> {
        if genes.len() != values.len() {
            return Err(GilError::Shape(format!("{} gene rows, {} value rows", genes.len(), values.len())));
        }
        let seq_len = genes.iter().map(Vec::len).max().unwrap_or(0);
        let b = genes.len();
        let mut batch = Batch {
            batch_size: b,
            seq_len,
            gene_indices: vec![0; b * seq_len],
            values: vec![0.0; b * seq_len],
            input_values: vec![0.0; b * seq_len],
            pad_mask: vec![true; b * seq_len],
            masked: vec![false; b * seq_len],
        };
        for (r, (g, v)) in genes.iter().zip(&values).enumerate() {
            if g.len() != v.len() {
                return Err(GilError::Shape(format!("row {r}: {} genes, {} values", g.len(), v.len())));
            }
            for l in 0..g.len() {
                if !v[l].is_finite() || v[l] < 0.0 {
                    return Err(GilError::Data(format!("row {r}: invalid value {}", v[l])));
                }
                let at = r * seq_len + l;
                batch.gene_indices[at] = g[l];
                batch.values[at] = v[l];
                batch.input_values[at] = v[l];
                batch.pad_mask[at] = false;
            }
        }
        Ok(batch)
    }

    pub fn from_samples(samples: &[&ExpressionSample]) -> Result<Self> {
        Self::from_rows(
            samples.iter().map(|s| s.gene_indices.clone()).collect(),
            samples.iter().map(|s| s.values.clone()).collect(),
        )
    }

    /// Masks each row with its own generator (one per row, in row order).
    pub fn mask_rows<R: Rng>(&mut self, spec: &MaskSpec, rngs: &mut [R]) -> Result<()> {
        if rngs.len() != self.batch_size {
            return Err(GilError::Usage(format!("{} generators for {} rows", rngs.len(), self.batch_size)));
        }
        for (r, rng) in rngs.iter_mut().enumerate() {
            let n = self.row_len(r);
            for p in mask_positions(n, spec, rng)? {
                let at = r * self.seq_len + p;
                self.input_values[at] = spec.sentinel;
                self.masked[at] = true;
            }
        }
        Ok(())
    }

    /// Number of non-pad tokens in row `r` (pads are always trailing).
    pub fn row_len(&self, r: usize) -> usize {
        let row = &self.pad_mask[r * self.seq_len..(r + 1) * self.seq_len];
        row.iter().filter(|p| !**p).count()
    }

    pub fn masked_count(&self) -> usize {
        self.masked.iter().filter(|m| **m).count()
    }

    pub fn validate(&self, vocab_size: usize, max_len: usize) -> Result<()> {
        if self.seq_len > max_len {
            return Err(GilError::Data(format!("sequence length {} exceeds max_len {max_len}", self.seq_len)));
        }
        for i in 0..self.gene_indices.len() {
            if self.masked[i] && self.pad_mask[i] {
                return Err(GilError::Data("masked position falls on padding".into()));
            }
            if !self.pad_mask[i] && self.gene_indices[i] >= vocab_size {
                return Err(GilError::Vocabulary { index: self.gene_indices[i], size: vocab_size });
            }
        }
        Ok(())
    }

    /// Drops padding: tokens are concatenated row by row.
    pub fn pack(&self) -> PackedBatch {
        let mut p = PackedBatch::default();
        for r in 0..self.batch_size {
            let start = p.genes.len();
            for l in 0..self.seq_len {
                let at = r * self.seq_len + l;
                if self.pad_mask[at] {
                    continue;
                }
                p.genes.push(self.gene_indices[at]);
                p.input_values.push(self.input_values[at]);
                p.values.push(self.values[at]);
                p.masked.push(self.masked[at]);
                p.positions.push(at);
            }
            p.segments.push(Segment { start, len: p.genes.len() - start });
        }
        p
    }
}

/// Padding-free token layout; each sample is one attention segment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PackedBatch {
    pub genes: Vec<usize>,
    pub input_values: Vec<f64>,
    pub values: Vec<f64>,
    pub masked: Vec<bool>,
    pub segments: Vec<Segment>,
    /// Flat `B×L` index of each packed token.
    pub positions: Vec<usize>,
}

impl PackedBatch {
    pub fn n_tokens(&self) -> usize {
        self.genes.len()
    }

    pub fn n_samples(&self) -> usize {
        self.segments.len()
    }

    /// Builds directly from samples, masking each with its own generator.
    pub fn from_samples_masked<R: Rng>(
        samples: &[&ExpressionSample],
        spec: &MaskSpec,
        mut rng_for: impl FnMut(&ExpressionSample) -> R,
    ) -> Result<Self> {
        let mut p = PackedBatch::default();
        for s in samples {
            let picks = mask_positions(s.len(), spec, &mut rng_for(s))?;
            p.push_masked(s, &picks, spec.sentinel);
        }
        Ok(p)
    }

    /// Appends `sample` as a new segment with the given ascending positions masked.
    pub fn push_masked(&mut self, sample: &ExpressionSample, picks: &[usize], sentinel: f64) {
        let start = self.genes.len();
        let mut next = picks.iter().peekable();
        for (l, (&g, &v)) in sample.gene_indices.iter().zip(&sample.values).enumerate() {
            let is_masked = next.peek() == Some(&&l);
            if is_masked {
                next.next();
            }
            self.genes.push(g);
            self.values.push(v);
            self.input_values.push(if is_masked { sentinel } else { v });
            self.masked.push(is_masked);
            self.positions.push(self.positions.len());
        }
        self.segments.push(Segment { start, len: sample.len() });
    }

    pub fn from_samples_unmasked(samples: &[&ExpressionSample]) -> Self {
        let mut p = PackedBatch::default();
        for s in samples {
            let start = p.genes.len();
            p.genes.extend_from_slice(&s.gene_indices);
            p.values.extend_from_slice(&s.values);
            p.input_values.extend_from_slice(&s.values);
            p.masked.extend(std::iter::repeat_n(false, s.len()));
            p.segments.push(Segment { start, len: s.len() });
        }
        p.positions = (0..p.genes.len()).collect();
        p
    }
}
