use crate::error::{GilError, Result};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// How values are hidden for masked value prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskSpec {
    pub ratio: f64,
    /// Substituted at masked positions; negative, so never a real expression value.
    pub sentinel: f64,
}

impl Default for MaskSpec {
    fn default() -> Self {
        Self { ratio: 0.15, sentinel: -1.0 }
    }
}

impl MaskSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(GilError::Config(format!("mask ratio {} not in (0, 1)", self.ratio)));
        }
        if !(self.sentinel < 0.0) || !self.sentinel.is_finite() {
            return Err(GilError::Config(format!("mask sentinel {} must be negative", self.sentinel)));
        }
        Ok(())
    }

    /// `round(ratio · n)`, at least one.
    pub fn count_for(&self, n_tokens: usize) -> usize {
        ((self.ratio * n_tokens as f64).round() as usize).clamp(1, n_tokens.max(1))
    }
}

/// Positions (ascending) to mask in a row of `n_tokens` real tokens.
pub fn mask_positions<R: Rng>(n_tokens: usize, spec: &MaskSpec, rng: &mut R) -> Result<Vec<usize>> {
    spec.validate()?;
    if n_tokens == 0 {
        return Err(GilError::Data("cannot mask a row with no tokens".into()));
    }
    let mut picked = index::sample(rng, n_tokens, spec.count_for(n_tokens)).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Masks a row-major `rows×seq_len` value matrix.
///
/// Returns the masked input values and the masked-position flags; pads are
/// never masked. Rows are processed in order from the one generator.
pub fn apply_mask<R: Rng>(
    values: &[f64],
    pad_mask: &[bool],
    seq_len: usize,
    spec: &MaskSpec,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<bool>)> {
    if values.len() != pad_mask.len() || seq_len == 0 || !values.len().is_multiple_of(seq_len) {
        return Err(GilError::Shape(format!(
            "apply_mask: {} values, {} pad flags, row length {seq_len}",
            values.len(),
            pad_mask.len()
        )));
    }
    let mut input = values.to_vec();
    let mut masked = vec![false; values.len()];
    for (r, pads) in pad_mask.chunks(seq_len).enumerate() {
        let real: Vec<usize> = (0..seq_len).filter(|&l| !pads[l]).collect();
        if real.is_empty() {
            return Err(GilError::Data(format!("row {r} is entirely padding")));
        }
        for p in mask_positions(real.len(), spec, rng)? {
            let at = r * seq_len + real[p];
            input[at] = spec.sentinel;
            masked[at] = true;
        }
    }
    Ok((input, masked))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn half_of_four_is_two() {
        let spec = MaskSpec { ratio: 0.5, sentinel: -1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (input, masked) = apply_mask(&[1.0, 2.0, 3.0, 4.0], &[false; 4], 4, &spec, &mut rng).unwrap();
        assert_eq!(masked.iter().filter(|&&m| m).count(), 2);
        for i in 0..4 {
            if masked[i] {
                assert_eq!(input[i], -1.0);
            } else {
                assert_eq!(input[i], (i + 1) as f64);
            }
        }
    }

    #[test]
    fn at_least_one_position_is_masked() {
        let spec = MaskSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(mask_positions(2, &spec, &mut rng).unwrap().len(), 1);
        assert_eq!(mask_positions(1, &spec, &mut rng).unwrap().len(), 1);
    }

    #[test]
    fn same_seed_same_pattern() {
        let spec = MaskSpec::default();
        let vals = vec![1.0; 60];
        let pads = vec![false; 60];
        let a = apply_mask(&vals, &pads, 20, &spec, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = apply_mask(&vals, &pads, 20, &spec, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pads_never_masked_and_all_pad_rows_rejected() {
        let spec = MaskSpec { ratio: 0.9, sentinel: -1.0 };
        let pads = [false, false, true, true];
        let (_, masked) = apply_mask(&[1.0; 4], &pads, 4, &spec, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(!masked[2] && !masked[3]);
        let err = apply_mask(&[1.0; 4], &[true; 4], 4, &spec, &mut ChaCha8Rng::seed_from_u64(2));
        assert!(matches!(err, Err(GilError::Data(_))));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(MaskSpec { ratio: 0.0, sentinel: -1.0 }.validate().is_err());
        assert!(MaskSpec { ratio: 1.0, sentinel: -1.0 }.validate().is_err());
        assert!(MaskSpec { ratio: 0.2, sentinel: 0.0 }.validate().is_err());
    }
}
