use super::config::{StrategyConfig, StrategyKind, TrainConfig};
use super::train::{train_items, Teacher, TrainItem, TrainLog};
use crate::error::{GilError, Result};
use crate::gil::{ExpressionSample, GeneMembership, StageView};
use crate::model::{init_params, ModelConfig, ModelParams};
use crate::rng::{self, site};
use rand::seq::index;
use std::collections::BTreeMap;

/// Parameters φ*_{s_k} after stage `k`; optimizer state is not kept.
#[derive(Debug, Clone, PartialEq)]
pub struct StageCheckpoint {
    pub stage: usize,
    pub params: ModelParams,
}

/// Retained stage views of earlier stages, keyed by stage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayBuffer {
    entries: BTreeMap<usize, Vec<ExpressionSample>>,
}

impl ReplayBuffer {
    pub fn insert(&mut self, stage: usize, samples: Vec<ExpressionSample>) {
        self.entries.insert(stage, samples);
    }

    pub fn get(&self, stage: usize) -> Option<&[ExpressionSample]> {
        self.entries.get(&stage).map(Vec::as_slice)
    }

    pub fn total_len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[ExpressionSample])> {
        self.entries.iter().map(|(&k, v)| (k, v.as_slice()))
    }
}

/// Uniform subset without replacement of `view`, in original order.
///
/// `size = None` or `size ≥ |view|` keeps everything.
pub fn build_replay_buffer(view: &StageView, size: Option<usize>, seed: u64) -> Vec<ExpressionSample> {
    let n = view.samples.len();
    match size {
        Some(s) if s < n => {
            let mut r = rng::stream(seed, site::REPLAY, &[view.stage as u64]);
            let mut picked = index::sample(&mut r, n, s).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|i| view.samples[i].clone()).collect()
        }
        _ => view.samples.clone(),
    }
}

fn items_of(view: &StageView) -> impl Iterator<Item = TrainItem<'_>> {
    view.samples.iter().map(move |sample| TrainItem { origin: view.stage, sample })
}

pub fn fresh_init(config: &ModelConfig, seed: u64) -> Result<ModelParams> {
    init_params(*config, &mut rng::stream(seed, site::INIT, &[]))
}

/// Current stage only.
pub fn train_stage_baseline(
    view: &StageView,
    init: ModelParams,
    cfg: &TrainConfig,
    log: &mut TrainLog,
) -> Result<StageCheckpoint> {
    let items: Vec<_> = items_of(view).collect();
    let params = train_items(&items, init, view.stage, cfg, None, log)?;
    Ok(StageCheckpoint { stage: view.stage, params })
}

/// Current stage plus every buffered earlier-stage sample, shuffled together.
pub fn train_stage_replay(
    view: &StageView,
    buffer: &ReplayBuffer,
    init: ModelParams,
    cfg: &TrainConfig,
    log: &mut TrainLog,
) -> Result<StageCheckpoint> {
    let mut items: Vec<_> = items_of(view).collect();
    for (stage, samples) in buffer.iter() {
        if stage >= view.stage {
            return Err(GilError::Usage(format!("buffer holds stage {stage} while training stage {}", view.stage)));
        }
        items.extend(samples.iter().map(|sample| TrainItem { origin: stage, sample }));
    }
    let params = train_items(&items, init, view.stage, cfg, None, log)?;
    Ok(StageCheckpoint { stage: view.stage, params })
}

/// Current stage with base-gene regression towards a frozen teacher.
pub fn train_stage_distill(
    view: &StageView,
    teacher: &ModelParams,
    lambda: f64,
    membership: &GeneMembership,
    init: ModelParams,
    cfg: &TrainConfig,
    log: &mut TrainLog,
) -> Result<StageCheckpoint> {
    if !(lambda >= 0.0) {
        return Err(GilError::Config(format!("lambda {lambda} must be non-negative")));
    }
    let items: Vec<_> = items_of(view).collect();
    let t = Teacher { params: teacher, lambda, membership };
    let params = train_items(&items, init, view.stage, cfg, Some(t), log)?;
    Ok(StageCheckpoint { stage: view.stage, params })
}

/// One run over the concatenation of all stage views from a fresh init.
pub fn train_oracle(
    views: &[StageView],
    config: &ModelConfig,
    cfg: &TrainConfig,
    log: &mut TrainLog,
) -> Result<ModelParams> {
    let items: Vec<_> = views.iter().flat_map(items_of).collect();
    train_items(&items, fresh_init(config, cfg.seed)?, 1, cfg, None, log)
}

/// The stage loop.
///
/// Stage 1 always trains as baseline. Later stages start from the previous
/// checkpoint and apply `strategy`. With `resume = Some(ckpt)` training picks
/// up after `ckpt.stage`; the returned list then starts with that checkpoint.
/// `on_stage` sees every newly trained checkpoint, e.g. to persist it.
/// The oracle strategy yields a single checkpoint labelled with the last stage.
pub fn run_gil(
    views: &[StageView],
    membership: &GeneMembership,
    config: &ModelConfig,
    strategy: &StrategyConfig,
    cfg: &TrainConfig,
    resume: Option<StageCheckpoint>,
    mut on_stage: impl FnMut(&StageCheckpoint, &TrainLog) -> Result<()>,
) -> Result<Vec<StageCheckpoint>> {
    strategy.validate()?;
    cfg.validate()?;
    let n = views.len();
    if n == 0 {
        return Err(GilError::Config("no stages to train".into()));
    }
    if let Some((k, v)) = views.iter().enumerate().find(|(k, v)| v.stage != k + 1) {
        return Err(GilError::Plan(format!("view #{k} is labelled stage {}", v.stage)));
    }

    if strategy.kind == StrategyKind::Oracle {
        if resume.is_some() {
            return Err(GilError::Usage("the oracle has no stages to resume".into()));
        }
        let mut log = TrainLog::default();
        let ckpt = StageCheckpoint { stage: n, params: train_oracle(views, config, cfg, &mut log)? };
        on_stage(&ckpt, &log)?;
        return Ok(vec![ckpt]);
    }

    let mut done: Vec<StageCheckpoint> = Vec::with_capacity(n);
    let first = match resume {
        Some(ckpt) => {
            if ckpt.stage == 0 || ckpt.stage > n {
                return Err(GilError::Checkpoint(format!("cannot resume from stage {}", ckpt.stage)));
            }
            let next = ckpt.stage + 1;
            done.push(ckpt);
            next
        }
        None => 1,
    };
    let mut buffer = ReplayBuffer::default();
    if strategy.kind == StrategyKind::Replay {
        for view in &views[..first - 1] {
            buffer.insert(view.stage, build_replay_buffer(view, strategy.replay_buffer_per_stage, cfg.seed));
        }
    }

    for view in &views[first - 1..] {
        let k = view.stage;
        let mut log = TrainLog::default();
        let ckpt = match done.last() {
            None => train_stage_baseline(view, fresh_init(config, cfg.seed)?, cfg, &mut log)?,
            Some(prev) => {
                let init = prev.params.clone();
                match strategy.kind {
                    StrategyKind::Replay => train_stage_replay(view, &buffer, init, cfg, &mut log)?,
                    StrategyKind::Distill => {
                        let lambda = strategy.lambda.unwrap_or(0.0);
                        train_stage_distill(view, &prev.params, lambda, membership, init, cfg, &mut log)?
                    }
                    _ => train_stage_baseline(view, init, cfg, &mut log)?,
                }
            }
        };
        if strategy.kind == StrategyKind::Replay {
            buffer.insert(k, build_replay_buffer(view, strategy.replay_buffer_per_stage, cfg.seed));
        }
        log::info!(
            "stage {k}: {} steps, final batch loss {:.5}",
            log.steps,
            log.losses.last().copied().unwrap_or(f64::NAN)
        );
        on_stage(&ckpt, &log)?;
        done.push(ckpt);
    }
    Ok(done)
}
