use super::merge_into;
use super::train::{checkpoint_name, MANIFEST_FILE};
use crate::data::DataDir;
use gil_core::evaluation::{compute_delta, regression_report, MetricKind, TargetHistory};
use gil_core::io::{file_sha256, hash_ids, load_checkpoint, load_plan, ResultRow, RunManifest, TargetKind};
use gil_core::{GilError, ModelParams, Result};
use std::collections::BTreeMap;
use std::path::Path;

/// A trained run with its checkpoints verified against the manifest.
pub struct LoadedRun {
    pub manifest: RunManifest,
    pub checkpoints: Vec<(usize, ModelParams)>,
}

pub fn load_run(run: &Path) -> Result<LoadedRun> {
    let manifest = RunManifest::load(&run.join(MANIFEST_FILE))?;
    if manifest.checkpoints.is_empty() {
        return Err(GilError::Data(format!("run {} has no checkpoints", run.display())));
    }
    let mut checkpoints = Vec::new();
    for (&k, sha) in &manifest.checkpoints {
        let path = run.join(checkpoint_name(k));
        if &file_sha256(&path)? != sha {
            return Err(GilError::Checkpoint(format!("{} does not match the run manifest", path.display())));
        }
        checkpoints.push((k, load_checkpoint(&path)?));
    }
    Ok(LoadedRun { manifest, checkpoints })
}

pub(crate) fn check_input(manifest: &RunManifest, name: &str, path: &Path) -> Result<()> {
    let expected =
        manifest.inputs.get(name).ok_or_else(|| GilError::Data(format!("run manifest records no {name}")))?;
    if &file_sha256(path)? != expected {
        return Err(GilError::Data(format!("{} differs from the {name} the run was trained on", path.display())));
    }
    Ok(())
}

pub(crate) fn row(
    m: &RunManifest,
    run_id: &str,
    model_stage: usize,
    kind: TargetKind,
    target: String,
    metric: &str,
    value: f64,
) -> ResultRow {
    ResultRow {
        run_id: run_id.to_string(),
        seed: m.seed,
        strategy: m.strategy.clone(),
        model_stage,
        target_kind: kind,
        target_id: target,
        metric: metric.to_string(),
        value,
    }
}

pub fn run(run: &Path, plan_path: &Path, data: &Path, out: &Path) -> Result<()> {
    let loaded = load_run(run)?;
    let m = &loaded.manifest;
    check_input(m, "plan.json", plan_path)?;
    let plan = load_plan(plan_path)?;
    let dir = DataDir::load(data)?;
    check_input(m, "corpus.jsonl", &dir.corpus_path())?;
    let cfg = m.config.regression();
    for (&k, expected) in &m.train_ids {
        let (train, _) = plan.split_holdout(k, cfg.holdout_fraction)?;
        if &hash_ids(&train) != expected {
            return Err(GilError::Data(format!("stage {k} training ids differ from the run's")));
        }
    }

    let refs: Vec<(usize, &ModelParams)> = loaded.checkpoints.iter().map(|(k, p)| (*k, p)).collect();
    let report = regression_report(&refs, &plan, &dir.corpus, &cfg, m.seed, &m.strategy)?;
    let id = &m.run_id;
    let mut rows: Vec<ResultRow> = report
        .entries
        .iter()
        .map(|(&(ms, j), &v)| row(m, id, ms, TargetKind::GeneStage, j.to_string(), "mse", v))
        .collect();

    let final_stage = *m.checkpoints.keys().next_back().expect("checked non-empty");
    let mut targets = BTreeMap::new();
    for j in 1..final_stage {
        let by_stage: BTreeMap<usize, f64> =
            report.entries.iter().filter(|((_, g), _)| *g == j).map(|(&(ms, _), &v)| (ms, v)).collect();
        if by_stage.contains_key(&j) {
            targets.insert(j.to_string(), TargetHistory { learned_at: j, by_stage });
        }
    }
    let delta = compute_delta(&targets, final_stage, MetricKind::Loss)?;
    rows.extend(
        delta.per_target.into_iter().map(|(j, v)| row(m, id, final_stage, TargetKind::GeneStage, j, "delta", v)),
    );
    merge_into(out, rows)?;
    log::info!("evaluated {} checkpoints of {id}", loaded.checkpoints.len());
    Ok(())
}
