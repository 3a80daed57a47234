use super::config::{Precision, TrainConfig};
use crate::error::{GilError, Result};
use crate::gil::{ExpressionSample, GeneMembership};
use crate::model::{forward, masked_loss, predict_packed, ModelParams, PackedBatch};
use crate::numerics::{AdamConfig, AdamState, LrSchedule, Tape};
use crate::rng::{self, site};
use std::collections::BTreeMap;

/// A training sample tagged with the stage whose view it is.
#[derive(Debug, Clone, Copy)]
pub struct TrainItem<'a> {
    pub origin: usize,
    pub sample: &'a ExpressionSample,
}

/// Frozen previous-stage model plus the distillation weight.
#[derive(Debug, Clone, Copy)]
pub struct Teacher<'a> {
    pub params: &'a ModelParams,
    pub lambda: f64,
    pub membership: &'a GeneMembership,
}

/// What happened during one training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    /// Minibatch objective before each step.
    pub losses: Vec<f64>,
    pub steps: u64,
    /// `(origin stage, sample id)` → number of times read.
    pub reads: BTreeMap<(usize, u64), u64>,
}

/// Shuffle order for one epoch: ascending per-sample hash keys.
pub fn epoch_order(items: &[TrainItem<'_>], seed: u64, stage_tag: usize, epoch: usize) -> Vec<usize> {
    let mut keyed: Vec<(u64, usize, u64, usize)> = items
        .iter()
        .enumerate()
        .map(|(i, it)| {
            let k = rng::key(seed, site::SHUFFLE, &[stage_tag as u64, epoch as u64, it.origin as u64, it.sample.id]);
            (k, it.origin, it.sample.id, i)
        })
        .collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|t| t.3).collect()
}

/// Minibatch Adam over `items` for `cfg.epochs_per_stage` epochs, starting
/// from `init` with a fresh optimizer state.
///
/// With a teacher whose λ > 0 the objective gains
/// `λ/B · Σ_{base positions} (v̂ − v̂_teacher)²`, both models reading the same
/// masked batch.
pub fn train_items(
    items: &[TrainItem<'_>],
    init: ModelParams,
    stage_tag: usize,
    cfg: &TrainConfig,
    teacher: Option<Teacher<'_>>,
    log: &mut TrainLog,
) -> Result<ModelParams> {
    cfg.validate()?;
    if items.is_empty() {
        return Err(GilError::Config(format!("stage {stage_tag} has no training samples")));
    }
    let teacher = teacher.filter(|t| t.lambda != 0.0);
    if let Some(t) = teacher {
        if !(t.lambda > 0.0) {
            return Err(GilError::Config(format!("lambda {} must be non-negative", t.lambda)));
        }
    }
    let mut params = init;
    if cfg.precision == Precision::F32 {
        params.round_to_f32();
    }
    let total = cfg.steps_per_epoch(items.len()) * cfg.epochs_per_stage as u64;
    let schedule = LrSchedule { base_lr: cfg.base_lr, warmup_steps: cfg.effective_warmup(total) };
    let mut adam = AdamState::new(params.tensors(), AdamConfig::default());
    let model_cfg = *params.config();

    for epoch in 0..cfg.epochs_per_stage {
        let order = epoch_order(items, cfg.seed, stage_tag, epoch);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&ExpressionSample> = chunk.iter().map(|&i| items[i].sample).collect();
            let mut origins = chunk.iter().map(|&i| items[i].origin as u64);
            for &i in chunk {
                *log.reads.entry((items[i].origin, items[i].sample.id)).or_insert(0) += 1;
            }
            let packed = PackedBatch::from_samples_masked(&batch, &cfg.mask, |s| {
                let origin = origins.next().expect("one origin per sample");
                rng::stream(cfg.seed, site::MASK, &[stage_tag as u64, epoch as u64, origin, s.id])
            })?;

            let mut tape = Tape::new();
            let pv = params.on_tape(&mut tape, true);
            let fwd = forward(&mut tape, &model_cfg, &pv, &packed)?;
            let mut loss = masked_loss(&mut tape, &fwd, &packed, batch.len())?;
            if let Some(t) = teacher {
                let target = predict_packed(&packed, t.params)?;
                let w = t.lambda / batch.len() as f64;
                let weights: Vec<f64> =
                    packed.genes.iter().map(|&g| if t.membership.is_base(g) { w } else { 0.0 }).collect();
                let distill = tape.weighted_sq_error(fwd.predictions, &target, &weights)?;
                loss = tape.add(loss, distill)?;
            }
            log.losses.push(tape.value(loss).item());
            let mut grads = tape.backward(loss)?;
            let g: Vec<_> = pv.all().iter().map(|&v| grads.take(v)).collect();
            let lr = schedule.lr_at(adam.step_count() + 1);
            adam.step(params.tensors_mut(), &g, lr)?;
            if cfg.precision == Precision::F32 {
                params.round_to_f32();
            }
            log.steps += 1;
        }
    }
    if !params.is_finite() {
        return Err(GilError::NonFinite("training"));
    }
    Ok(params)
}

/// Value of the distillation term for one masked batch, without training.
pub fn distillation_term(
    student: &ModelParams,
    teacher: &Teacher<'_>,
    packed: &PackedBatch,
    n_samples: usize,
) -> Result<f64> {
    let s = predict_packed(packed, student)?;
    let t = predict_packed(packed, teacher.params)?;
    let mut total = 0.0;
    for ((&g, a), b) in packed.genes.iter().zip(&s).zip(&t) {
        if teacher.membership.is_base(g) {
            total += (a - b) * (a - b);
        }
    }
    Ok(teacher.lambda * total / n_samples as f64)
}
