use super::sample::ExpressionSample;
use crate::error::{GilError, Result};
use std::collections::{BTreeMap, BTreeSet};

/// The `k` genes with the largest summed expression across `dataset`.
///
/// Ties go to the smaller gene index. Returned ascending.
pub fn select_crucial_genes(dataset: &[ExpressionSample], k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(GilError::Config("crucial gene count must be at least 1".into()));
    }
    if dataset.is_empty() {
        return Err(GilError::Config("cannot select crucial genes from an empty dataset".into()));
    }
    let mut totals: BTreeMap<usize, f64> = BTreeMap::new();
    for s in dataset {
        for (&g, &v) in s.gene_indices.iter().zip(&s.values) {
            *totals.entry(g).or_insert(0.0) += v;
        }
    }
    let mut expressed: Vec<(usize, f64)> = totals.into_iter().filter(|&(_, t)| t > 0.0).collect();
    if k > expressed.len() {
        return Err(GilError::Config(format!(
            "asked for {k} crucial genes but only {} genes are expressed",
            expressed.len()
        )));
    }
    expressed.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut chosen: Vec<usize> = expressed[..k].iter().map(|&(g, _)| g).collect();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Removes genes already claimed by an earlier (higher-priority) dataset.
pub fn dedup_crucial_sets(registry: &[(String, Vec<usize>)]) -> Vec<(String, Vec<usize>)> {
    let mut claimed = BTreeSet::new();
    registry
        .iter()
        .map(|(name, genes)| {
            let kept: BTreeSet<usize> = genes.iter().copied().filter(|g| !claimed.contains(g)).collect();
            claimed.extend(kept.iter().copied());
            (name.clone(), kept.into_iter().collect())
        })
        .collect()
}
