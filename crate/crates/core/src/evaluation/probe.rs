use crate::error::{GilError, Result};
use crate::gil::{build_downstream_view, ExpressionSample};
use crate::model::{ModelParams, PackedBatch};
use crate::numerics::{AdamConfig, AdamState, Tape, Tensor};
use crate::rng::{self, site};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

/// Linear-probe training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { epochs: 20, lr: 0.01, batch_size: 64, test_fraction: 0.2, seed: 0 }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || !(self.lr > 0.0) {
            return Err(GilError::Config("probe epochs, batch_size and lr must be positive".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(GilError::Config(format!("probe test_fraction {} not in (0, 1)", self.test_fraction)));
        }
        Ok(())
    }
}

/// Softmax regression `x·W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Held-out result of one probe fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOutcome {
    pub accuracy: f64,
    /// Mean training cross-entropy per epoch.
    pub train_losses: Vec<f64>,
    pub n_train: usize,
    pub n_test: usize,
}

impl LinearClassifier {
    /// Fits by minibatch Adam on cross-entropy, starting from zeros.
    pub fn fit(features: &Tensor, labels: &[usize], n_classes: usize, cfg: &ProbeConfig) -> Result<(Self, Vec<f64>)> {
        cfg.validate()?;
        let (n, d) = (features.rows(), features.cols());
        if n != labels.len() || n == 0 {
            return Err(GilError::Shape(format!("{n} feature rows, {} labels", labels.len())));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(GilError::Data(format!("label {y} outside {n_classes} classes")));
        }
        let mut params = vec![Tensor::zeros(vec![d, n_classes]), Tensor::zeros(vec![n_classes])];
        let mut adam = AdamState::new(&params, AdamConfig::default());
        let mut order: Vec<usize> = (0..n).collect();
        let mut losses = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng::stream(cfg.seed, site::PROBE_SHUFFLE, &[epoch as u64]));
            let mut total = 0.0;
            for chunk in order.chunks(cfg.batch_size) {
                let mut x = Vec::with_capacity(chunk.len() * d);
                chunk.iter().for_each(|&i| x.extend_from_slice(features.row(i)));
                let y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
                let mut tape = Tape::new();
                let xv = tape.constant(Tensor::new(vec![chunk.len(), d], x)?);
                let w = tape.leaf(params[0].clone(), true);
                let b = tape.leaf(params[1].clone(), true);
                let logits = tape.matmul(xv, w)?;
                let logits = tape.add_bias(logits, b)?;
                let loss = tape.cross_entropy(logits, &y)?;
                total += tape.value(loss).item() * chunk.len() as f64;
                let mut grads = tape.backward(loss)?;
                let g = [grads.take(w), grads.take(b)];
                adam.step(&mut params, &g, cfg.lr)?;
            }
            losses.push(total / n as f64);
        }
        let bias = params.pop().expect("two tensors");
        let weight = params.pop().expect("two tensors");
        Ok((Self { weight, bias }, losses))
    }

    pub fn predict(&self, features: &Tensor) -> Vec<usize> {
        let c = self.bias.len();
        (0..features.rows())
            .map(|i| {
                let x = features.row(i);
                (0..c)
                    .map(|k| {
                        let s: f64 = x.iter().enumerate().map(|(j, v)| v * self.weight.get(j, k)).sum();
                        s + self.bias.data()[k]
                    })
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (k, s)| if s > best.1 { (k, s) } else { best })
                    .0
            })
            .collect()
    }

    pub fn accuracy(&self, features: &Tensor, labels: &[usize]) -> f64 {
        if labels.is_empty() {
            return 0.0;
        }
        let hits = self.predict(features).iter().zip(labels).filter(|(p, y)| p == y).count();
        hits as f64 / labels.len() as f64
    }
}

/// Seeded shuffle of `0..n` cut into (train, test).
pub fn split_train_test(n: usize, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, site::PROBE_SPLIT, &[]));
    let n_test = (test_fraction * n as f64).round() as usize;
    let test = order.split_off(n - n_test);
    (order, test)
}

fn take_rows(features: &Tensor, rows: &[usize]) -> Result<Tensor> {
    let d = features.cols();
    let mut out = Vec::with_capacity(rows.len() * d);
    rows.iter().for_each(|&i| out.extend_from_slice(features.row(i)));
    Tensor::new(vec![rows.len(), d], out)
}

/// Splits, fits on the train part and scores on the test part.
pub fn fit_and_score(features: &Tensor, labels: &[usize], n_classes: usize, cfg: &ProbeConfig) -> Result<ProbeOutcome> {
    cfg.validate()?;
    let mut distinct = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(GilError::Config("probe dataset has fewer than two classes".into()));
    }
    let (train, test) = split_train_test(labels.len(), cfg.test_fraction, cfg.seed);
    if train.is_empty() || test.is_empty() {
        return Err(GilError::Config(format!("{} samples are too few to split", labels.len())));
    }
    let pick = |rows: &[usize]| rows.iter().map(|&i| labels[i]).collect::<Vec<_>>();
    let (clf, train_losses) = LinearClassifier::fit(&take_rows(features, &train)?, &pick(&train), n_classes, cfg)?;
    let accuracy = clf.accuracy(&take_rows(features, &test)?, &pick(&test));
    Ok(ProbeOutcome { accuracy, train_losses, n_train: train.len(), n_test: test.len() })
}

/// Mean-pooled features of bounded downstream views, `N×d`.
///
/// `known` limits the input to genes the checkpoint was trained on. Truncation
/// depends only on `probe_seed` and sample ids.
pub fn downstream_features(
    params: &ModelParams,
    dataset: &[ExpressionSample],
    known: &[bool],
    probe_seed: u64,
) -> Result<Tensor> {
    let cfg = params.config();
    if known.len() != cfg.vocab_size {
        return Err(GilError::Shape(format!("{} gene flags for vocabulary {}", known.len(), cfg.vocab_size)));
    }
    let views = dataset
        .iter()
        .map(|s| {
            let mut r = rng::stream(probe_seed, site::DOWNSTREAM_VIEW, &[s.id]);
            build_downstream_view(s, known, cfg.max_len, &mut r)
        })
        .collect::<Result<Vec<_>>>()?;
    let d = cfg.d_model;
    let mut out = Vec::with_capacity(views.len() * d);
    for chunk in views.chunks(64) {
        let refs: Vec<&ExpressionSample> = chunk.iter().collect();
        let packed = PackedBatch::from_samples_unmasked(&refs);
        out.extend(crate::model::pooled_features(&packed, params)?.into_data());
    }
    Tensor::new(vec![views.len(), d], out)
}

/// Frozen-backbone probe: features from `params`, a fresh linear layer on top.
pub fn train_linear_probe(
    params: &ModelParams,
    dataset: &[ExpressionSample],
    n_classes: usize,
    known: &[bool],
    cfg: &ProbeConfig,
) -> Result<ProbeOutcome> {
    let labels = dataset
        .iter()
        .map(|s| s.label.ok_or_else(|| GilError::Data(format!("sample {} has no label", s.id))))
        .collect::<Result<Vec<_>>>()?;
    let features = downstream_features(params, dataset, known, cfg.seed)?;
    fit_and_score(&features, &labels, n_classes, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_features_are_learned_exactly() {
        let n = 200;
        let labels: Vec<usize> = (0..n).map(|i| i % 4).collect();
        let mut x = vec![0.0; n * 4];
        labels.iter().enumerate().for_each(|(i, &y)| x[i * 4 + y] = 1.0);
        let f = Tensor::new(vec![n, 4], x).unwrap();
        let out = fit_and_score(&f, &labels, 4, &ProbeConfig::default()).unwrap();
        assert_eq!(out.accuracy, 1.0);
        assert_eq!(out.n_test, 40);
        assert!(out.train_losses.last().unwrap() < &out.train_losses[0]);
    }

    #[test]
    fn single_class_is_rejected() {
        let f = Tensor::zeros(vec![10, 2]);
        let err = fit_and_score(&f, &[1; 10], 3, &ProbeConfig::default());
        assert!(matches!(err, Err(GilError::Config(_))));
    }

    #[test]
    fn split_is_seeded_partition() {
        let (a, b) = split_train_test(50, 0.2, 7);
        assert_eq!((a.len(), b.len()), (40, 10));
        let mut all = [a.clone(), b.clone()].concat();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
        assert_eq!(split_train_test(50, 0.2, 7), (a, b));
    }

    #[test]
    fn fit_is_deterministic() {
        let labels: Vec<usize> = (0..60).map(|i| (i * 7) % 3).collect();
        let x: Vec<f64> = (0..120).map(|i| ((i * 37) % 11) as f64 / 11.0).collect();
        let f = Tensor::new(vec![60, 2], x).unwrap();
        let cfg = ProbeConfig::default();
        assert_eq!(fit_and_score(&f, &labels, 3, &cfg).unwrap(), fit_and_score(&f, &labels, 3, &cfg).unwrap());
    }
}
