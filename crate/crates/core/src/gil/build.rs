use super::crucial::{dedup_crucial_sets, select_crucial_genes};
use super::plan::{partition_dataset, partition_genes, GenePartitionSpec, Stage, StagePlan};
use super::sample::ExpressionSample;
use crate::error::{GilError, Result};
use crate::rng::{self, site};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanConfig {
    pub n_stages: usize,
    pub base_fraction: f64,
    /// Crucial genes selected per downstream dataset before dedup.
    pub crucial_genes: usize,
    /// Dataset → stage. Unlisted datasets go to stage `min(position + 1, n_stages)`.
    pub assignment: BTreeMap<String, usize>,
    /// Datasets whose crucial genes are kept out of every stage and the base set.
    pub excluded: Vec<String>,
    /// Tail fraction of each stage block reserved for evaluation.
    pub holdout_fraction: f64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            n_stages: 2,
            base_fraction: 0.5,
            crucial_genes: 20,
            assignment: BTreeMap::new(),
            excluded: Vec::new(),
            holdout_fraction: 0.2,
        }
    }
}

/// Crucial selection, dedup (in `downstream` order), gene and sample partitioning.
pub fn build_plan(
    corpus_ids: &[u64],
    vocab_size: usize,
    downstream: &[(String, &[ExpressionSample])],
    cfg: &PlanConfig,
    seed: u64,
) -> Result<StagePlan> {
    let names: BTreeSet<&String> = downstream.iter().map(|(n, _)| n).collect();
    if let Some(x) = cfg.excluded.iter().chain(cfg.assignment.keys()).find(|x| !names.contains(x)) {
        return Err(GilError::Config(format!("plan names unknown downstream dataset `{x}`")));
    }
    let selected = downstream
        .iter()
        .map(|(name, data)| Ok((name.clone(), select_crucial_genes(data, cfg.crucial_genes)?)))
        .collect::<Result<Vec<_>>>()?;
    let deduped = dedup_crucial_sets(&selected);
    let mut excluded = BTreeSet::new();
    let mut placed = Vec::new();
    let mut assignment = BTreeMap::new();
    for (i, (name, genes)) in deduped.iter().enumerate() {
        if cfg.excluded.contains(name) {
            excluded.extend(genes.iter().copied());
        } else {
            let k = cfg.assignment.get(name).copied().unwrap_or((i + 1).min(cfg.n_stages));
            assignment.insert(name.clone(), k);
            placed.push((name.clone(), genes.clone()));
        }
    }
    let spec = GenePartitionSpec {
        n_stages: cfg.n_stages,
        base_fraction: cfg.base_fraction,
        crucial: &placed,
        assignment: &assignment,
        excluded: &excluded,
    };
    let (base, stage_genes) = partition_genes(vocab_size, &spec, &mut rng::stream(seed, site::GENE_PARTITION, &[]))?;
    let blocks = partition_dataset(corpus_ids, cfg.n_stages, &mut rng::stream(seed, site::DATA_PARTITION, &[]))?;
    let plan = StagePlan {
        base,
        stages: stage_genes.into_iter().zip(blocks).map(|(genes, sample_ids)| Stage { genes, sample_ids }).collect(),
        crucial: deduped.into_iter().collect(),
        n_stages: cfg.n_stages,
    };
    plan.validate(Some(vocab_size))?;
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crucial_genes_land_in_assigned_stages() {
        let a: Vec<ExpressionSample> =
            (0..5).map(|i| ExpressionSample::new(i, vec![3, 4, 8], vec![5.0, 4.0, 0.1], None).unwrap()).collect();
        let b: Vec<ExpressionSample> =
            (0..5).map(|i| ExpressionSample::new(i, vec![4, 9], vec![3.0, 2.0], None).unwrap()).collect();
        let ds = vec![("a".to_string(), a.as_slice()), ("b".to_string(), b.as_slice())];
        let cfg = PlanConfig { crucial_genes: 2, ..PlanConfig::default() };
        let ids: Vec<u64> = (0..10).collect();
        let plan = build_plan(&ids, 20, &ds, &cfg, 1).unwrap();
        assert_eq!(plan.crucial["a"], vec![3, 4]);
        assert_eq!(plan.crucial["b"], vec![9]);
        assert!(plan.stages[0].genes.contains(&3) && plan.stages[0].genes.contains(&4));
        assert!(plan.stages[1].genes.contains(&9));
        assert_eq!(plan.stage_of_dataset("a"), Some(1));
        assert_eq!(plan.stage_of_dataset("b"), Some(2));
        assert_eq!(build_plan(&ids, 20, &ds, &cfg, 1).unwrap(), plan);

        let cfg = PlanConfig { crucial_genes: 2, excluded: vec!["a".into()], ..PlanConfig::default() };
        let plan = build_plan(&ids, 20, &ds, &cfg, 1).unwrap();
        assert_eq!(plan.stage_of_dataset("a"), None);
        assert!(!plan.base.contains(&3) && plan.stages.iter().all(|s| !s.genes.contains(&3)));
    }
}
