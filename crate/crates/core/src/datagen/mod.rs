//! Synthetic latent-factor expression data with planted class signal.

use crate::error::{GilError, Result};
use crate::evaluation::{fit_and_score, ProbeConfig};
use crate::gil::{ExpressionSample, GeneVocabulary};
use crate::numerics::Tensor;
use crate::rng::{self, site};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One labelled downstream dataset to generate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DownstreamSpec {
    pub name: String,
    pub n_samples: usize,
    pub n_classes: usize,
    pub n_crucial: usize,
    /// Class shift δ applied to raw crucial-gene values.
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenConfig {
    pub n_genes: usize,
    pub n_samples: usize,
    pub n_factors: usize,
    /// Factor loading w.
    pub loading: f64,
    pub bias_mean: f64,
    pub bias_std: f64,
    /// Per-gene noise σ.
    pub noise: f64,
    pub dropout_threshold: f64,
    pub downstream: Vec<DownstreamSpec>,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        let ds =
            |name: &str| DownstreamSpec { name: name.into(), n_samples: 1000, n_classes: 4, n_crucial: 20, shift: 6.0 };
        Self {
            n_genes: 2000,
            n_samples: 10_000,
            n_factors: 50,
            loading: 2.0,
            bias_mean: -7.5,
            bias_std: 0.5,
            noise: 0.3,
            dropout_threshold: 0.05,
            downstream: vec![ds("d1"), ds("d2")],
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GilError::Config(m));
        if self.n_genes == 0 || self.n_factors == 0 {
            return bad("n_genes and n_factors must be positive".into());
        }
        if !(self.noise >= 0.0) || !self.loading.is_finite() || !self.bias_mean.is_finite() || !(self.bias_std >= 0.0) {
            return bad("noise and bias_std must be non-negative, loading and bias_mean finite".into());
        }
        if !(self.dropout_threshold >= 0.0) {
            return bad("dropout_threshold must be non-negative".into());
        }
        let mut names = std::collections::BTreeSet::new();
        for d in &self.downstream {
            if !names.insert(&d.name) {
                return bad(format!("downstream dataset `{}` listed twice", d.name));
            }
            if d.n_classes < 2 {
                return bad(format!("`{}` needs at least two classes", d.name));
            }
            if !(d.shift > 0.0) {
                return bad(format!("`{}` shift must be positive", d.name));
            }
            if d.n_samples < d.n_classes {
                return bad(format!("`{}` has fewer samples than classes", d.name));
            }
        }
        let planted: usize = self.downstream.iter().map(|d| d.n_crucial).sum();
        if planted > self.n_genes {
            return bad(format!("{planted} planted genes exceed {} genes", self.n_genes));
        }
        Ok(())
    }
}

/// Fixed per-gene structure derived from the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct GenModel {
    pub factor_of: Vec<usize>,
    pub bias: Vec<f64>,
}

impl GenModel {
    /// Balanced random gene→factor assignment and Gaussian per-gene biases.
    pub fn new(cfg: &GenConfig) -> Result<Self> {
        cfg.validate()?;
        let mut perm: Vec<usize> = (0..cfg.n_genes).collect();
        perm.shuffle(&mut rng::stream(cfg.seed, site::GEN_MODULES, &[]));
        let factor_of = perm.iter().map(|p| p % cfg.n_factors).collect();
        let mut r = rng::stream(cfg.seed, site::GEN_GENES, &[]);
        let bias =
            (0..cfg.n_genes).map(|_| cfg.bias_mean + cfg.bias_std * r.sample::<f64, _>(StandardNormal)).collect();
        Ok(Self { factor_of, bias })
    }
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn raw_profile<R: Rng>(cfg: &GenConfig, model: &GenModel, rng: &mut R) -> Vec<f64> {
    let z: Vec<f64> = (0..cfg.n_factors).map(|_| rng.sample(StandardNormal)).collect();
    (0..cfg.n_genes)
        .map(|g| {
            let eps: f64 = rng.sample(StandardNormal);
            cfg.loading * z[model.factor_of[g]] + model.bias[g] + cfg.noise * eps
        })
        .collect()
}

fn to_sample(cfg: &GenConfig, id: u64, raw: &[f64], label: Option<usize>) -> ExpressionSample {
    let (mut genes, mut values) = (Vec::new(), Vec::new());
    for (g, &r) in raw.iter().enumerate() {
        let v = softplus(r);
        if v >= cfg.dropout_threshold {
            genes.push(g);
            values.push(v);
        }
    }
    ExpressionSample { id, gene_indices: genes, values, label }
}

/// Unlabelled corpus with ids `0..n_samples`.
pub fn gen_pretrain_corpus(cfg: &GenConfig, model: &GenModel) -> Vec<ExpressionSample> {
    (0..cfg.n_samples as u64)
        .map(|i| {
            let raw = raw_profile(cfg, model, &mut rng::stream(cfg.seed, site::GEN_PRETRAIN, &[i]));
            to_sample(cfg, i, &raw, None)
        })
        .collect()
}

/// Distinct ±1 class patterns over `n_crucial` genes.
///
/// With enough genes, rows 1..=C of a Sylvester Hadamard matrix are tiled so
/// every class turns on exactly half its crucial genes; otherwise classes use
/// binary codes.
pub fn sign_codes(n_classes: usize, n_crucial: usize) -> Result<Vec<Vec<f64>>> {
    let order = (n_classes + 1).next_power_of_two();
    let hadamard = |i: usize, j: usize| {
        if (i & j).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    };
    let codes: Vec<Vec<f64>> = if n_crucial >= order {
        let full = n_crucial - n_crucial % order;
        (0..n_classes)
            .map(|c| {
                (0..n_crucial)
                    .map(|j| {
                        if j < full {
                            hadamard(c + 1, j % order)
                        } else {
                            let q = (j - full) / 2;
                            let s = hadamard(c + 1, q % order);
                            if (j - full).is_multiple_of(2) {
                                s
                            } else {
                                -s
                            }
                        }
                    })
                    .collect()
            })
            .collect()
    } else {
        (0..n_classes)
            .map(|c| (0..n_crucial).map(|j| if j < 64 && (c >> j) & 1 == 1 { 1.0 } else { -1.0 }).collect())
            .collect()
    };
    for a in 0..codes.len() {
        for b in a + 1..codes.len() {
            if codes[a] == codes[b] {
                return Err(GilError::Config(format!(
                    "{n_crucial} crucial genes cannot give {n_classes} classes distinct patterns"
                )));
            }
        }
    }
    Ok(codes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub name: String,
    pub n_classes: usize,
    pub samples: Vec<ExpressionSample>,
}

/// Labelled samples whose crucial-gene raw values are shifted by `δ·pattern_c`.
///
/// Labels are `i mod C` under a seeded permutation, so classes are balanced
/// within one.
pub fn gen_downstream_labeled(
    cfg: &GenConfig,
    model: &GenModel,
    index: usize,
    crucial: &[usize],
) -> Result<LabeledDataset> {
    let spec = cfg.downstream.get(index).ok_or_else(|| GilError::Config(format!("no downstream dataset #{index}")))?;
    if let Some(&g) = crucial.iter().find(|&&g| g >= cfg.n_genes) {
        return Err(GilError::Vocabulary { index: g, size: cfg.n_genes });
    }
    let codes = sign_codes(spec.n_classes, crucial.len())?;
    let mut labels: Vec<usize> = (0..spec.n_samples).map(|i| i % spec.n_classes).collect();
    labels.shuffle(&mut rng::stream(cfg.seed, site::GEN_LABELS, &[index as u64]));
    let samples = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let mut r = rng::stream(cfg.seed, site::GEN_DOWNSTREAM, &[index as u64, i as u64]);
            let mut raw = raw_profile(cfg, model, &mut r);
            for (&g, s) in crucial.iter().zip(&codes[y]) {
                raw[g] += spec.shift * s;
            }
            to_sample(cfg, i as u64, &raw, Some(y))
        })
        .collect();
    Ok(LabeledDataset { name: spec.name.clone(), n_classes: spec.n_classes, samples })
}

/// Disjoint planted gene sets, one per downstream dataset (ascending).
pub fn planted_genes(cfg: &GenConfig) -> Result<Vec<Vec<usize>>> {
    cfg.validate()?;
    let mut pool: Vec<usize> = (0..cfg.n_genes).collect();
    pool.shuffle(&mut rng::stream(cfg.seed, site::GEN_PLANTED, &[]));
    let mut at = 0;
    Ok(cfg
        .downstream
        .iter()
        .map(|d| {
            let mut g = pool[at..at + d.n_crucial].to_vec();
            at += d.n_crucial;
            g.sort_unstable();
            g
        })
        .collect())
}

/// Dense `N×|genes|` value matrix (zero where a gene is absent).
pub fn value_matrix(samples: &[ExpressionSample], genes: &[usize]) -> Result<Tensor> {
    let mut out = Vec::with_capacity(samples.len() * genes.len());
    for s in samples {
        out.extend(genes.iter().map(|&g| s.value_of(g).unwrap_or(0.0)));
    }
    Tensor::new(vec![samples.len(), genes.len()], out)
}

/// Held-out accuracy of a linear classifier trained directly on the values of `genes`.
pub fn separability_check(dataset: &LabeledDataset, genes: &[usize], probe: &ProbeConfig) -> Result<f64> {
    let labels = dataset
        .samples
        .iter()
        .map(|s| s.label.ok_or_else(|| GilError::Data(format!("sample {} has no label", s.id))))
        .collect::<Result<Vec<_>>>()?;
    let x = value_matrix(&dataset.samples, genes)?;
    Ok(fit_and_score(&x, &labels, dataset.n_classes, probe)?.accuracy)
}

/// Everything `datagen` writes.
#[derive(Debug, Clone)]
pub struct Generated {
    pub vocab: GeneVocabulary,
    pub corpus: Vec<ExpressionSample>,
    pub downstream: Vec<LabeledDataset>,
    /// Dataset name → genes carrying its class signal.
    pub planted: BTreeMap<String, Vec<usize>>,
}

pub fn generate_all(cfg: &GenConfig) -> Result<Generated> {
    let model = GenModel::new(cfg)?;
    let planted = planted_genes(cfg)?;
    let downstream = planted
        .iter()
        .enumerate()
        .map(|(i, genes)| gen_downstream_labeled(cfg, &model, i, genes))
        .collect::<Result<Vec<_>>>()?;
    Ok(Generated {
        vocab: GeneVocabulary::synthetic(cfg.n_genes),
        corpus: gen_pretrain_corpus(cfg, &model),
        planted: cfg.downstream.iter().map(|d| d.name.clone()).zip(planted).collect(),
        downstream,
    })
}
