use super::batch::PackedBatch;
use super::config::ModelConfig;
use super::forward::{forward, masked_loss};
use super::mask::MaskSpec;
use super::params::{ModelParams, ParamVars};
use crate::error::Result;
use crate::gil::ExpressionSample;
use crate::numerics::{check_gradients, Tensor};
use crate::rng::{self, site};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Gradient check of the masked value loss with respect to every parameter.
///
/// Parameters are perturbed well away from their small initial scale so the
/// nonlinearities are exercised; three samples of different lengths form one
/// packed batch.
pub fn loss_gradcheck(config: ModelConfig, seed: u64) -> Result<f64> {
    let mut r = rng::stream(seed, site::GRADCHECK, &[1]);
    let mut params = ModelParams::init(config, &mut r)?;
    let noise = Normal::new(0.0, 0.5).expect("valid std");
    for t in params.tensors_mut() {
        t.data_mut().iter_mut().for_each(|x| *x += noise.sample(&mut r));
    }
    let samples = [5usize, 3, 4]
        .iter()
        .enumerate()
        .map(|(i, &len)| {
            let mut genes: Vec<usize> = rand::seq::index::sample(&mut r, config.vocab_size, len).into_vec();
            genes.sort_unstable();
            let values = (0..len).map(|_| r.random_range(0.05..2.0)).collect();
            ExpressionSample::new(i as u64, genes, values, None)
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&ExpressionSample> = samples.iter().collect();
    let spec = MaskSpec { ratio: 0.4, ..MaskSpec::default() };
    let packed = PackedBatch::from_samples_masked(&refs, &spec, |s| rng::stream(seed, site::GRADCHECK, &[2, s.id]))?;

    let inputs: Vec<Tensor> = params.tensors().to_vec();
    check_gradients(&inputs, |tape, vars| {
        let pv = ParamVars::from_vars(vars.to_vec(), config.n_layers);
        let fwd = forward(tape, &config, &pv, &packed)?;
        masked_loss(tape, &fwd, &packed, refs.len())
    })
}

/// The toy shape used for gradient checks: one layer, width 8.
pub fn gradcheck_config() -> ModelConfig {
    ModelConfig { vocab_size: 12, d_model: 8, n_layers: 1, n_heads: 2, d_ff: 16, max_len: 16 }
}
