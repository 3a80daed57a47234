//! Baseline, oracle, replay and distillation training, and the stage loop.

mod config;
mod run;
mod train;

pub use config::{Precision, StrategyConfig, StrategyKind, TrainConfig};
pub use run::{
    build_replay_buffer, fresh_init, run_gil, train_oracle, train_stage_baseline, train_stage_distill,
    train_stage_replay, ReplayBuffer, StageCheckpoint,
};
pub use train::{distillation_term, epoch_order, train_items, Teacher, TrainItem, TrainLog};
