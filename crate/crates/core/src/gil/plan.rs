use crate::error::{GilError, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashSet};

/// Genes and training samples owned by one stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub genes: Vec<usize>,
    pub sample_ids: Vec<u64>,
}

/// Base genes, the disjoint stage-specific gene sets, the per-stage sample
/// blocks and the crucial-gene registry.
///
/// Stages are numbered from 1 in the public API.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StagePlan {
    pub base: Vec<usize>,
    pub stages: Vec<Stage>,
    pub crucial: BTreeMap<String, Vec<usize>>,
    pub n_stages: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneRole {
    Unassigned,
    Base,
    Stage(usize),
}

/// Per-gene role lookup built from a plan.
#[derive(Debug, Clone)]
pub struct GeneMembership {
    roles: Vec<GeneRole>,
}

impl GeneMembership {
    pub fn role(&self, gene: usize) -> Option<GeneRole> {
        self.roles.get(gene).copied()
    }

    pub fn vocab_size(&self) -> usize {
        self.roles.len()
    }

    /// Visible while training stage `k`.
    pub fn visible_at(&self, gene: usize, k: usize) -> bool {
        matches!(self.role(gene), Some(GeneRole::Base)) || self.role(gene) == Some(GeneRole::Stage(k))
    }

    pub fn is_base(&self, gene: usize) -> bool {
        self.role(gene) == Some(GeneRole::Base)
    }
}

impl StagePlan {
    /// Checks every structural invariant; `vocab_size` additionally bounds indices.
    pub fn validate(&self, vocab_size: Option<usize>) -> Result<()> {
        if self.n_stages == 0 || self.stages.len() != self.n_stages {
            return Err(GilError::Plan(format!(
                "n_stages is {} but {} stages are listed",
                self.n_stages,
                self.stages.len()
            )));
        }
        let mut owner: BTreeMap<usize, String> = BTreeMap::new();
        let mut claim = |g: usize, who: String| -> Result<()> {
            if let Some(limit) = vocab_size {
                if g >= limit {
                    return Err(GilError::Plan(format!("gene {g} outside vocabulary of {limit}")));
                }
            }
            if let Some(prev) = owner.insert(g, who.clone()) {
                return Err(GilError::Plan(format!("gene {g} appears in both {prev} and {who}")));
            }
            Ok(())
        };
        for &g in &self.base {
            claim(g, "base".into())?;
        }
        for (k, s) in self.stages.iter().enumerate() {
            for &g in &s.genes {
                claim(g, format!("stage {}", k + 1))?;
            }
        }
        let mut seen_ids = HashSet::new();
        for (k, s) in self.stages.iter().enumerate() {
            for &id in &s.sample_ids {
                if !seen_ids.insert(id) {
                    return Err(GilError::Plan(format!("sample {id} assigned twice (stage {})", k + 1)));
                }
            }
        }
        let mut crucial_seen = BTreeSet::new();
        for (name, genes) in &self.crucial {
            for &g in genes {
                if !crucial_seen.insert(g) {
                    return Err(GilError::Plan(format!("crucial gene {g} of `{name}` is shared")));
                }
                if let Some(limit) = vocab_size {
                    if g >= limit {
                        return Err(GilError::Plan(format!("crucial gene {g} outside vocabulary")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn stage(&self, k: usize) -> Result<&Stage> {
        if k == 0 || k > self.n_stages {
            return Err(GilError::Plan(format!("stage {k} not in 1..={}", self.n_stages)));
        }
        Ok(&self.stages[k - 1])
    }

    pub fn membership(&self, vocab_size: usize) -> Result<GeneMembership> {
        let mut roles = vec![GeneRole::Unassigned; vocab_size];
        let mut set = |g: usize, role| -> Result<()> {
            *roles.get_mut(g).ok_or(GilError::Vocabulary { index: g, size: vocab_size })? = role;
            Ok(())
        };
        for &g in &self.base {
            set(g, GeneRole::Base)?;
        }
        for (k, s) in self.stages.iter().enumerate() {
            for &g in &s.genes {
                set(g, GeneRole::Stage(k + 1))?;
            }
        }
        Ok(GeneMembership { roles })
    }

    /// Flags for genes trained by the end of stage `m`: B ∪ T^{s_1} ∪ … ∪ T^{s_m}.
    pub fn known_genes(&self, m: usize, vocab_size: usize) -> Result<Vec<bool>> {
        self.stage(m)?;
        let mut known = vec![false; vocab_size];
        for &g in self.base.iter().chain(self.stages[..m].iter().flat_map(|s| &s.genes)) {
            *known.get_mut(g).ok_or(GilError::Vocabulary { index: g, size: vocab_size })? = true;
        }
        Ok(known)
    }

    /// Stage whose specific genes contain `dataset`'s crucial genes.
    pub fn stage_of_dataset(&self, dataset: &str) -> Option<usize> {
        let genes = self.crucial.get(dataset)?;
        let first = *genes.first()?;
        self.stages.iter().position(|s| s.genes.binary_search(&first).is_ok()).map(|k| k + 1)
    }

    /// Splits stage `k`'s sample block into (training, held-out).
    ///
    /// The last `round(fraction · n)` ids in stored order are held out; the
    /// stored order is the random order produced by [`partition_dataset`].
    pub fn split_holdout(&self, k: usize, fraction: f64) -> Result<(Vec<u64>, Vec<u64>)> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(GilError::Config(format!("holdout fraction {fraction} not in [0, 1)")));
        }
        let ids = &self.stage(k)?.sample_ids;
        let held = (fraction * ids.len() as f64).round() as usize;
        let cut = ids.len() - held;
        Ok((ids[..cut].to_vec(), ids[cut..].to_vec()))
    }
}

/// What to place where when splitting the vocabulary.
#[derive(Debug, Clone)]
pub struct GenePartitionSpec<'a> {
    pub n_stages: usize,
    pub base_fraction: f64,
    /// Deduplicated crucial sets.
    pub crucial: &'a [(String, Vec<usize>)],
    /// Dataset name → stage (1-based).
    pub assignment: &'a BTreeMap<String, usize>,
    /// Genes kept out of every stage and out of the base set.
    pub excluded: &'a BTreeSet<usize>,
}

/// Base genes and stage-specific gene sets (all ascending).
///
/// Each crucial set goes wholly into its assigned stage. The base set is drawn
/// uniformly from non-crucial genes; the rest are dealt so that stage sizes
/// stay as equal as possible.
pub fn partition_genes<R: Rng>(
    vocab_size: usize,
    spec: &GenePartitionSpec<'_>,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<Vec<usize>>)> {
    let n = spec.n_stages;
    if n == 0 {
        return Err(GilError::Config("n_stages must be at least 1".into()));
    }
    if !(spec.base_fraction > 0.0 && spec.base_fraction < 1.0) {
        return Err(GilError::Config(format!("base_fraction {} not in (0, 1)", spec.base_fraction)));
    }
    let mut crucial_all = BTreeSet::new();
    for (name, genes) in spec.crucial {
        for &g in genes {
            if g >= vocab_size {
                return Err(GilError::Vocabulary { index: g, size: vocab_size });
            }
            if spec.excluded.contains(&g) {
                return Err(GilError::Plan(format!("crucial gene {g} of `{name}` is also excluded")));
            }
            if !crucial_all.insert(g) {
                return Err(GilError::Plan(format!("crucial sets overlap at gene {g} (`{name}`)")));
            }
        }
    }
    let eligible = vocab_size - spec.excluded.iter().filter(|&&g| g < vocab_size).count();
    if crucial_all.len() as f64 > (1.0 - spec.base_fraction) * eligible as f64 {
        return Err(GilError::Config(format!(
            "{} crucial genes do not fit in the non-base share of {eligible} genes",
            crucial_all.len()
        )));
    }

    let mut stages: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (name, genes) in spec.crucial {
        let k = *spec
            .assignment
            .get(name)
            .ok_or_else(|| GilError::Config(format!("no stage assigned to dataset `{name}`")))?;
        if k == 0 || k > n {
            return Err(GilError::Config(format!("dataset `{name}` assigned to stage {k} of {n}")));
        }
        stages[k - 1].extend(genes);
    }

    let mut pool: Vec<usize> =
        (0..vocab_size).filter(|g| !crucial_all.contains(g) && !spec.excluded.contains(g)).collect();
    pool.shuffle(rng);
    let n_base = (spec.base_fraction * eligible as f64).round() as usize;
    let mut base = pool[..n_base].to_vec();
    for &g in &pool[n_base..] {
        let smallest = (0..n).min_by_key(|&k| (stages[k].len(), k)).expect("n >= 1");
        stages[smallest].push(g);
    }
    base.sort_unstable();
    stages.iter_mut().for_each(|s| s.sort_unstable());
    Ok((base, stages))
}

/// Uniform random split of sample ids into `n_stages` blocks whose sizes differ by at most one.
pub fn partition_dataset<R: Rng>(ids: &[u64], n_stages: usize, rng: &mut R) -> Result<Vec<Vec<u64>>> {
    if n_stages == 0 {
        return Err(GilError::Config("n_stages must be at least 1".into()));
    }
    if ids.len() < n_stages {
        return Err(GilError::Config(format!("{} samples cannot fill {n_stages} stages", ids.len())));
    }
    let mut order = ids.to_vec();
    order.shuffle(rng);
    let (q, r) = (order.len() / n_stages, order.len() % n_stages);
    let mut blocks = Vec::with_capacity(n_stages);
    let mut at = 0;
    for k in 0..n_stages {
        let size = q + usize::from(k < r);
        blocks.push(order[at..at + size].to_vec());
        at += size;
    }
    Ok(blocks)
}
