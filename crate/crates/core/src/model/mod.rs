//! The gene-expression transformer and its masked value prediction loss.

mod batch;
mod config;
mod forward;
mod gradcheck;
mod mask;
mod params;

pub use batch::{Batch, PackedBatch};
pub use config::ModelConfig;
pub(crate) use forward::pooled_features;
pub use forward::{
    embed, embed_var, encode, encode_var, extract_features, forward, loss_tran, masked_loss, predict_packed,
    predict_values, predict_var, Forward,
};
pub use gradcheck::{gradcheck_config, loss_gradcheck};
pub use mask::{apply_mask, mask_positions, MaskSpec};
pub use params::{ModelParams, ParamVars, INIT_STD};

use crate::error::Result;
use rand::Rng;

/// Fresh parameters: N(0, 0.02²) weights, unit gains, zero biases.
pub fn init_params<R: Rng>(config: ModelConfig, rng: &mut R) -> Result<ModelParams> {
    ModelParams::init(config, rng)
}
