//! On-disk formats: expression JSON lines, vocabularies, plans, checkpoints,
//! result rows, experiment configs and run manifests.

mod checkpoint;
mod config;
mod expression;
mod files;
mod manifest;
mod plan;
mod results;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use config::{ExperimentConfig, PathsConfig};
pub use expression::{
    load_expression, load_vocabulary, parse_expression, save_expression, save_vocabulary, write_expression,
};
pub use files::{file_sha256, write_atomic};
pub use manifest::{hash_ids, RunManifest, MANIFEST_VERSION};
pub use plan::{load_plan, save_plan};
pub use results::{merge_rows, read_results, write_results, ResultRow, TargetKind};
