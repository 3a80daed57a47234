use super::{load_config, run_id};
use crate::data::DataDir;
use gil_core::gil::build_training_views;
use gil_core::io::{
    file_sha256, hash_ids, load_checkpoint, load_plan, save_checkpoint, write_atomic, RunManifest, MANIFEST_VERSION,
};
use gil_core::strategies::run_gil;
use gil_core::{GilError, Result, StageCheckpoint, StrategyConfig, StrategyKind};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PLAN_COPY: &str = "plan.json";
pub const LOSSES_FILE: &str = "losses.csv";

pub fn checkpoint_name(stage: usize) -> String {
    format!("stage_{stage}.ckpt")
}

pub struct TrainArgs<'a> {
    pub plan: &'a Path,
    pub data: &'a Path,
    pub strategy: &'a str,
    pub seed: Option<u64>,
    pub out: &'a Path,
    pub config: Option<&'a Path>,
    pub lambda: Option<f64>,
    pub replay_size: Option<&'a str>,
    pub resume: Option<&'a Path>,
}

/// Flags win over the config file; the config's knobs apply only when it
/// names the same strategy. Replay defaults to keeping everything, distill to λ = 1.
fn resolve_strategy(a: &TrainArgs<'_>, from_config: &StrategyConfig) -> Result<StrategyConfig> {
    let kind: StrategyKind = a.strategy.parse()?;
    let same = from_config.kind == kind;
    let mut s = StrategyConfig { kind, replay_buffer_per_stage: None, lambda: None };
    match kind {
        StrategyKind::Replay => {
            s.replay_buffer_per_stage = match a.replay_size {
                Some(v) => parse_replay_size(v)?,
                None if same => from_config.replay_buffer_per_stage,
                None => None,
            };
        }
        StrategyKind::Distill => {
            s.lambda = Some(a.lambda.or(if same { from_config.lambda } else { None }).unwrap_or(1.0));
        }
        _ => {}
    }
    if a.replay_size.is_some() && kind != StrategyKind::Replay {
        return Err(GilError::Usage(format!("--replay-size does not apply to {kind}")));
    }
    if a.lambda.is_some() && kind != StrategyKind::Distill {
        return Err(GilError::Usage(format!("--lambda does not apply to {kind}")));
    }
    s.validate()?;
    Ok(s)
}

pub fn parse_replay_size(v: &str) -> Result<Option<usize>> {
    if v == "full" {
        return Ok(None);
    }
    v.parse().map(Some).map_err(|_| GilError::Usage(format!("replay size `{v}` is neither a count nor `full`")))
}

fn stage_from_name(path: &Path) -> Result<usize> {
    path.file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.strip_prefix("stage_"))
        .and_then(|n| n.strip_suffix(".ckpt"))
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| GilError::Usage(format!("resume file {} is not named stage_<k>.ckpt", path.display())))
}

pub fn run(a: TrainArgs<'_>) -> Result<()> {
    let mut cfg = load_config(a.config)?;
    let seed = a.seed.unwrap_or(cfg.seeds[0]);
    cfg.train.seed = seed;
    cfg.seeds = vec![seed];
    cfg.strategy = resolve_strategy(&a, &cfg.strategy)?;
    cfg.validate()?;

    let plan = load_plan(a.plan)?;
    let dir = DataDir::load(a.data)?;
    let vocab_size = dir.vocab.len();
    if cfg.model.vocab_size != vocab_size {
        return Err(GilError::Config(format!(
            "model vocabulary {} does not match data vocabulary {vocab_size}",
            cfg.model.vocab_size
        )));
    }
    plan.validate(Some(vocab_size))?;
    let membership = plan.membership(vocab_size)?;
    let views =
        build_training_views(&dir.corpus, &plan, vocab_size, cfg.model.max_len, cfg.plan.holdout_fraction, seed)?;

    std::fs::create_dir_all(a.out)?;
    let plan_bytes = std::fs::read(a.plan)?;
    write_atomic(&a.out.join(PLAN_COPY), &plan_bytes)?;

    let mut manifest = RunManifest {
        format_version: MANIFEST_VERSION,
        run_id: run_id(a.out)?,
        strategy: cfg.strategy.label(),
        seed,
        config: cfg.clone(),
        inputs: BTreeMap::from([
            ("plan.json".to_string(), gil_core::rng::sha256_hex(&plan_bytes)),
            ("corpus.jsonl".to_string(), file_sha256(&dir.corpus_path())?),
            ("vocab.txt".to_string(), file_sha256(&dir.vocab_path())?),
        ]),
        train_ids: BTreeMap::new(),
        checkpoints: BTreeMap::new(),
    };
    for k in 1..=plan.n_stages {
        let (train, _) = plan.split_holdout(k, cfg.plan.holdout_fraction)?;
        manifest.train_ids.insert(k, hash_ids(&train));
    }

    let resume = match a.resume {
        Some(path) => {
            let stage = stage_from_name(path)?;
            let params = load_checkpoint(path)?;
            if params.config() != &cfg.model {
                return Err(GilError::Checkpoint(format!(
                    "{} was trained with a different model config",
                    path.display()
                )));
            }
            let dst = a.out.join(checkpoint_name(stage));
            save_checkpoint(&dst, &params)?;
            manifest.checkpoints.insert(stage, file_sha256(&dst)?);
            Some(StageCheckpoint { stage, params })
        }
        None => None,
    };

    let mut losses = String::from("stage,step,loss\n");
    let out = a.out;
    run_gil(&views, &membership, &cfg.model, &cfg.strategy, &cfg.train, resume, |ckpt, log| {
        let path = out.join(checkpoint_name(ckpt.stage));
        save_checkpoint(&path, &ckpt.params)?;
        manifest.checkpoints.insert(ckpt.stage, file_sha256(&path)?);
        for (i, l) in log.losses.iter().enumerate() {
            let _ = writeln!(losses, "{},{},{l}", ckpt.stage, i + 1);
        }
        write_atomic(&out.join(LOSSES_FILE), losses.as_bytes())?;
        manifest.save(&out.join(MANIFEST_FILE))
    })?;
    manifest.save(&out.join(MANIFEST_FILE))?;
    log::info!("run {} ({}) finished", manifest.run_id, manifest.strategy);
    Ok(())
}
