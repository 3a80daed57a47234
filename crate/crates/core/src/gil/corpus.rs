use super::plan::{GeneMembership, StagePlan};
use super::sample::ExpressionSample;
use super::view::stage_view;
use crate::error::{GilError, Result};
use crate::rng::{self, site};
use std::collections::HashMap;

/// Samples addressable by id.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    samples: Vec<ExpressionSample>,
    by_id: HashMap<u64, usize>,
}

impl Corpus {
    pub fn new(samples: Vec<ExpressionSample>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            if by_id.insert(s.id, i).is_some() {
                return Err(GilError::Data(format!("sample id {} occurs twice", s.id)));
            }
        }
        Ok(Self { samples, by_id })
    }

    pub fn get(&self, id: u64) -> Result<&ExpressionSample> {
        self.by_id
            .get(&id)
            .map(|&i| &self.samples[i])
            .ok_or_else(|| GilError::Data(format!("sample id {id} not in corpus")))
    }

    pub fn samples(&self) -> &[ExpressionSample] {
        &self.samples
    }

    pub fn ids(&self) -> Vec<u64> {
        self.samples.iter().map(|s| s.id).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Stage-restricted training samples D^{s_k}.
#[derive(Debug, Clone, PartialEq)]
pub struct StageView {
    pub stage: usize,
    pub samples: Vec<ExpressionSample>,
    /// Samples dropped because nothing survived the restriction.
    pub skipped: usize,
}

/// Views of `ids` at stage `k`; truncation draws from `(seed, k, id)` streams.
pub fn build_stage_view(
    corpus: &Corpus,
    membership: &GeneMembership,
    k: usize,
    ids: &[u64],
    max_len: usize,
    seed: u64,
) -> Result<StageView> {
    let mut samples = Vec::with_capacity(ids.len());
    let mut skipped = 0;
    for &id in ids {
        let mut r = rng::stream(seed, site::STAGE_VIEW, &[k as u64, id]);
        match stage_view(corpus.get(id)?, membership, k, max_len, &mut r)? {
            Some(v) => samples.push(v),
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        log::info!("stage {k}: skipped {skipped} samples with an empty restriction");
    }
    Ok(StageView { stage: k, samples, skipped })
}

/// Training views for every stage, excluding each block's held-out tail.
pub fn build_training_views(
    corpus: &Corpus,
    plan: &StagePlan,
    vocab_size: usize,
    max_len: usize,
    holdout_fraction: f64,
    seed: u64,
) -> Result<Vec<StageView>> {
    let membership = plan.membership(vocab_size)?;
    (1..=plan.n_stages)
        .map(|k| {
            let (train, _) = plan.split_holdout(k, holdout_fraction)?;
            build_stage_view(corpus, &membership, k, &train, max_len, seed)
        })
        .collect()
}
