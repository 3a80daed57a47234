use crate::error::{GilError, Result};
use crate::gil::{stage_view, Corpus, GeneRole, StagePlan};
use crate::model::{mask_positions, predict_packed, MaskSpec, ModelParams, PackedBatch};
use crate::rng::{self, site};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// How squared errors over qualifying positions are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// One mean over every (sample, position) pair.
    #[default]
    Pooled,
    /// Mean per gene, then mean over genes.
    PerGene,
}

/// How many masked copies of each held-out sample are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMasking {
    /// One random mask per sample.
    Single,
    /// A seeded split of the positions into groups of the training mask size;
    /// one masked copy per group, so every position is scored exactly once.
    #[default]
    Cover,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegressionConfig {
    pub mask: MaskSpec,
    pub eval_seed: u64,
    pub holdout_fraction: f64,
    pub aggregation: Aggregation,
    pub masking: EvalMasking,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        Self {
            mask: MaskSpec::default(),
            eval_seed: 0,
            holdout_fraction: 0.2,
            aggregation: Aggregation::Pooled,
            masking: EvalMasking::Cover,
        }
    }
}

/// Masked position groups for one held-out sample.
pub fn eval_mask_groups<R: Rng>(
    n: usize,
    spec: &MaskSpec,
    masking: EvalMasking,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    Ok(match masking {
        EvalMasking::Single => vec![mask_positions(n, spec, rng)?],
        EvalMasking::Cover => {
            spec.validate()?;
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            order
                .chunks(spec.count_for(n))
                .map(|c| {
                    let mut g = c.to_vec();
                    g.sort_unstable();
                    g
                })
                .collect()
        }
    })
}

/// Masked held-out stage-`j` views, identical for every checkpoint given the eval seed.
#[derive(Debug, Clone)]
pub struct EvalSet {
    pub gene_stage: usize,
    pub packed: Vec<PackedBatch>,
    /// Per packed token: whether it counts (masked and gene ∈ T^{s_j}).
    pub qualifying: Vec<Vec<bool>>,
    pub n_samples: usize,
}

impl EvalSet {
    pub fn build(
        plan: &StagePlan,
        corpus: &Corpus,
        j: usize,
        max_len: usize,
        vocab_size: usize,
        cfg: &RegressionConfig,
    ) -> Result<Self> {
        let (train, held) = plan.split_holdout(j, cfg.holdout_fraction)?;
        check_disjoint(&train, &held)?;
        let membership = plan.membership(vocab_size)?;
        let mut views = Vec::with_capacity(held.len());
        for &id in &held {
            let mut r = rng::stream(cfg.eval_seed, site::EVAL_VIEW, &[j as u64, id]);
            if let Some(v) = stage_view(corpus.get(id)?, &membership, j, max_len, &mut r)? {
                views.push(v);
            }
        }
        let mut packed = Vec::new();
        let mut qualifying = Vec::new();
        let mut current = PackedBatch::default();
        for v in &views {
            let mut r = rng::stream(cfg.eval_seed, site::EVAL_MASK, &[j as u64, v.id]);
            for group in eval_mask_groups(v.len(), &cfg.mask, cfg.masking, &mut r)? {
                current.push_masked(v, &group, cfg.mask.sentinel);
            }
            if current.n_samples() >= 64 {
                packed.push(std::mem::take(&mut current));
            }
        }
        if current.n_samples() > 0 {
            packed.push(current);
        }
        for p in &packed {
            qualifying.push(
                p.genes
                    .iter()
                    .zip(&p.masked)
                    .map(|(&g, &m)| m && membership.role(g) == Some(GeneRole::Stage(j)))
                    .collect(),
            );
        }
        let n_qualifying: usize = qualifying.iter().map(|q: &Vec<bool>| q.iter().filter(|&&b| b).count()).sum();
        if n_qualifying == 0 {
            return Err(GilError::Eval(format!(
                "stage {j}: no masked stage-specific positions among {} held-out samples ({} non-empty views)",
                held.len(),
                views.len()
            )));
        }
        Ok(Self { gene_stage: j, packed, qualifying, n_samples: views.len() })
    }

    /// Loss of `params` on this set.
    pub fn loss(&self, params: &ModelParams, aggregation: Aggregation) -> Result<f64> {
        let mut pooled = (0.0, 0usize);
        let mut per_gene: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for (p, q) in self.packed.iter().zip(&self.qualifying) {
            let pred = predict_packed(p, params)?;
            for t in (0..p.n_tokens()).filter(|&t| q[t]) {
                let e = (pred[t] - p.values[t]).powi(2);
                pooled.0 += e;
                pooled.1 += 1;
                let slot = per_gene.entry(p.genes[t]).or_insert((0.0, 0));
                slot.0 += e;
                slot.1 += 1;
            }
        }
        Ok(match aggregation {
            Aggregation::Pooled => pooled.0 / pooled.1 as f64,
            Aggregation::PerGene => per_gene.values().map(|(s, c)| s / *c as f64).sum::<f64>() / per_gene.len() as f64,
        })
    }
}

/// Rejects any overlap between training and held-out ids.
pub fn check_disjoint(train: &[u64], held: &[u64]) -> Result<()> {
    let train: BTreeSet<u64> = train.iter().copied().collect();
    match held.iter().find(|id| train.contains(id)) {
        Some(id) => Err(GilError::Eval(format!("held-out sample {id} was also used for training"))),
        None => Ok(()),
    }
}

/// Masked squared error of `params` on held-out stage-`j` views, counting
/// only masked positions whose gene is specific to stage `j`.
pub fn eval_gene_regression(
    params: &ModelParams,
    plan: &StagePlan,
    corpus: &Corpus,
    j: usize,
    cfg: &RegressionConfig,
) -> Result<f64> {
    let mc = params.config();
    EvalSet::build(plan, corpus, j, mc.max_len, mc.vocab_size, cfg)?.loss(params, cfg.aggregation)
}

/// `loss[model_stage][gene_stage]` for `gene_stage ≤ model_stage`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegressionReport {
    pub seed: u64,
    pub strategy: String,
    pub mask: MaskSpec,
    pub eval_size: BTreeMap<usize, usize>,
    pub entries: BTreeMap<(usize, usize), f64>,
}

impl RegressionReport {
    pub fn insert(&mut self, model_stage: usize, gene_stage: usize, loss: f64) -> Result<()> {
        if gene_stage == 0 || gene_stage > model_stage {
            return Err(GilError::Report(format!("gene stage {gene_stage} not seen by model stage {model_stage}")));
        }
        if !(loss >= 0.0) {
            return Err(GilError::Report(format!("loss {loss} is negative or NaN")));
        }
        self.entries.insert((model_stage, gene_stage), loss);
        Ok(())
    }

    pub fn get(&self, model_stage: usize, gene_stage: usize) -> Option<f64> {
        self.entries.get(&(model_stage, gene_stage)).copied()
    }
}

/// Evaluates every checkpoint on every gene stage it has seen.
pub fn regression_report(
    checkpoints: &[(usize, &ModelParams)],
    plan: &StagePlan,
    corpus: &Corpus,
    cfg: &RegressionConfig,
    seed: u64,
    strategy: &str,
) -> Result<RegressionReport> {
    let mut report = RegressionReport { seed, strategy: strategy.into(), mask: cfg.mask, ..Default::default() };
    let mut sets: BTreeMap<usize, EvalSet> = BTreeMap::new();
    for &(m, params) in checkpoints {
        let mc = params.config();
        for j in 1..=m {
            if let std::collections::btree_map::Entry::Vacant(e) = sets.entry(j) {
                let set = EvalSet::build(plan, corpus, j, mc.max_len, mc.vocab_size, cfg)?;
                report.eval_size.insert(j, set.n_samples);
                e.insert(set);
            }
            report.insert(m, j, sets[&j].loss(params, cfg.aggregation)?)?;
        }
    }
    Ok(report)
}
