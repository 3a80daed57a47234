//! Fixtures shared by the criterion benches in `benches/`.

use gil_core::datagen::{gen_pretrain_corpus, GenConfig, GenModel};
use gil_core::gil::StageView;
use gil_core::{ExpressionSample, ModelConfig, Tensor};

/// Deterministic dense tensor with entries in [-1, 1].
pub fn wave(rows: usize, cols: usize, phase: f64) -> Tensor {
    let data = (0..rows * cols).map(|i| (i as f64 * 0.618 + phase).sin()).collect();
    Tensor::new(vec![rows, cols], data).expect("shape matches data")
}

/// Synthetic expression profiles over `n_genes` genes.
pub fn corpus(n_genes: usize, n_samples: usize) -> Vec<ExpressionSample> {
    let cfg = GenConfig { n_genes, n_samples, downstream: Vec::new(), ..GenConfig::default() };
    gen_pretrain_corpus(&cfg, &GenModel::new(&cfg).expect("valid generator config"))
}

/// The non-empty `samples` as a stage-1 view, truncated to `max_len` genes.
pub fn view(samples: Vec<ExpressionSample>, max_len: usize) -> StageView {
    let samples = samples
        .into_iter()
        .filter(|s| !s.is_empty())
        .map(|s| {
            let keep: Vec<usize> = (0..s.len().min(max_len)).collect();
            s.select(&keep)
        })
        .collect();
    StageView { stage: 1, samples, skipped: 0 }
}

/// The desk model over a 2000-gene vocabulary.
pub fn desk_model() -> ModelConfig {
    ModelConfig::desk(2000)
}
