#![allow(dead_code)]

use gil_core::datagen::{generate_all, GenConfig};
use gil_core::gil::{build_plan, build_training_views, Corpus, PlanConfig, StageView};
use gil_core::model::ModelConfig;
use gil_core::strategies::TrainConfig;
use gil_core::StagePlan;

pub const VOCAB: usize = 60;

pub struct Fixture {
    pub corpus: Corpus,
    pub plan: StagePlan,
    pub views: Vec<StageView>,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

pub fn gen_config() -> GenConfig {
    GenConfig {
        n_genes: VOCAB,
        n_samples: 160,
        n_factors: 6,
        bias_mean: -1.5,
        downstream: vec![],
        ..GenConfig::default()
    }
}

pub fn tiny_model() -> ModelConfig {
    ModelConfig { vocab_size: VOCAB, d_model: 8, n_layers: 1, n_heads: 2, d_ff: 16, max_len: 24 }
}

pub fn tiny_train(seed: u64) -> TrainConfig {
    TrainConfig { batch_size: 16, epochs_per_stage: 2, warmup_steps: 4, seed, ..TrainConfig::default() }
}

pub fn fixture(n_stages: usize, seed: u64) -> Fixture {
    let g = generate_all(&gen_config()).unwrap();
    let corpus = Corpus::new(g.corpus).unwrap();
    let cfg = PlanConfig { n_stages, ..PlanConfig::default() };
    let plan = build_plan(&corpus.ids(), VOCAB, &[], &cfg, seed).unwrap();
    let model = tiny_model();
    let views = build_training_views(&corpus, &plan, VOCAB, model.max_len, cfg.holdout_fraction, seed).unwrap();
    Fixture { corpus, plan, views, model, train: tiny_train(seed) }
}
