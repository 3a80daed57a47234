//! Gene incremental learning benchmark.
//!
//! A small masked-value transformer is trained over stages that each expose a
//! disjoint slice of the gene vocabulary (plus shared base genes). Strategies
//! for limiting forgetting are compared by gene-wise regression loss and by
//! linear probes on downstream classification data.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod error;
pub mod evaluation;
pub mod gil;
pub mod io;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod strategies;

pub use error::{GilError, Result};
pub use gil::{ExpressionSample, GeneVocabulary, StagePlan};
pub use io::ExperimentConfig;
pub use model::{ModelConfig, ModelParams};
pub use numerics::{Tape, Tensor};
pub use strategies::{StageCheckpoint, StrategyConfig, StrategyKind, TrainConfig};
