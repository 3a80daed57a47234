use super::eval::{check_input, load_run, row};
use super::merge_into;
use super::train::PLAN_COPY;
use crate::data::dataset_name;
use gil_core::evaluation::{compute_delta, train_linear_probe, MetricKind, TargetHistory};
use gil_core::io::{load_expression, load_plan, TargetKind};
use gil_core::{GilError, Result};
use std::collections::BTreeMap;
use std::path::Path;

/// Probes every checkpoint of `run`. The probe split and truncation use the
/// run's seed; classes are `0..=max label`.
pub fn run(run: &Path, downstream: &Path, out: &Path) -> Result<()> {
    let loaded = load_run(run)?;
    let m = &loaded.manifest;
    let plan_path = run.join(PLAN_COPY);
    check_input(m, "plan.json", &plan_path)?;
    let plan = load_plan(&plan_path)?;
    let name = dataset_name(downstream)?;
    let data = load_expression(downstream)?;
    let n_classes = data
        .iter()
        .map(|s| s.label.map(|l| l + 1).ok_or_else(|| GilError::Data(format!("sample {} has no label", s.id))))
        .try_fold(0, |acc, l| l.map(|l| acc.max(l)))?;
    let probe_cfg = gil_core::evaluation::ProbeConfig { seed: m.seed, ..m.config.probe.clone() };

    let mut by_stage = BTreeMap::new();
    let mut rows = Vec::new();
    for (k, params) in &loaded.checkpoints {
        let known = plan.known_genes(*k, params.config().vocab_size)?;
        let outcome = train_linear_probe(params, &data, n_classes, &known, &probe_cfg)?;
        log::info!("{name} at stage {k}: accuracy {:.4}", outcome.accuracy);
        by_stage.insert(*k, outcome.accuracy);
        rows.push(row(m, &m.run_id, *k, TargetKind::Downstream, name.clone(), "accuracy", outcome.accuracy));
    }
    let final_stage = *by_stage.keys().next_back().expect("run has checkpoints");
    if let Some(learned) = plan.stage_of_dataset(&name).filter(|l| by_stage.contains_key(l)) {
        let targets = BTreeMap::from([(name.clone(), TargetHistory { learned_at: learned, by_stage })]);
        let delta = compute_delta(&targets, final_stage, MetricKind::Accuracy)?;
        rows.extend(
            delta
                .per_target
                .into_iter()
                .map(|(t, v)| row(m, &m.run_id, final_stage, TargetKind::Downstream, t, "delta", v)),
        );
    }
    merge_into(out, rows)
}
