use super::plan::GeneMembership;
use super::sample::ExpressionSample;
use crate::error::{GilError, Result};
use rand::seq::index;
use rand::Rng;

/// Restricts `sample` to base plus stage-`k` genes, truncated to `max_len` by
/// uniform selection.
///
/// Returns `None` when nothing survives the restriction; callers skip such
/// samples.
pub fn stage_view<R: Rng>(
    sample: &ExpressionSample,
    membership: &GeneMembership,
    k: usize,
    max_len: usize,
    rng: &mut R,
) -> Result<Option<ExpressionSample>> {
    if k == 0 {
        return Err(GilError::Plan("stages are numbered from 1".into()));
    }
    let mut keep = Vec::with_capacity(sample.len());
    for (p, &g) in sample.gene_indices.iter().enumerate() {
        if g >= membership.vocab_size() {
            return Err(GilError::Vocabulary { index: g, size: membership.vocab_size() });
        }
        if membership.visible_at(g, k) {
            keep.push(p);
        }
    }
    if keep.is_empty() {
        return Ok(None);
    }
    if keep.len() > max_len {
        let picked = index::sample(rng, keep.len(), max_len);
        keep = picked.iter().map(|i| keep[i]).collect();
    }
    Ok(Some(sample.select(&keep)))
}

/// Restricts a downstream profile to genes flagged in `known` (one flag per
/// vocabulary entry), then bounds it to `max_len` genes.
pub fn build_downstream_view<R: Rng>(
    sample: &ExpressionSample,
    known: &[bool],
    max_len: usize,
    rng: &mut R,
) -> Result<ExpressionSample> {
    let mut keep = Vec::with_capacity(sample.len());
    for (p, &g) in sample.gene_indices.iter().enumerate() {
        match known.get(g) {
            None => return Err(GilError::Vocabulary { index: g, size: known.len() }),
            Some(true) => keep.push(p),
            Some(false) => {}
        }
    }
    if keep.len() > max_len {
        let picked = index::sample(rng, keep.len(), max_len);
        keep = picked.iter().map(|i| keep[i]).collect();
    }
    Ok(sample.select(&keep))
}
