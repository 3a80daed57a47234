use super::load_config;
use crate::data::DataDir;
use gil_core::gil::build_plan;
use gil_core::io::save_plan;
use gil_core::Result;
use std::path::Path;

/// Dataset priority for gene dedup follows the configured downstream order.
pub fn run(data: &Path, config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<()> {
    let cfg = load_config(config)?;
    let seed = seed.unwrap_or(cfg.seeds[0]);
    let dir = DataDir::load(data)?;
    let names: Vec<String> = cfg.datagen.downstream.iter().map(|d| d.name.clone()).collect();
    let downstream = dir.downstream(&names)?;
    let refs: Vec<(String, &[gil_core::ExpressionSample])> =
        downstream.iter().map(|(n, s)| (n.clone(), s.as_slice())).collect();
    let plan = build_plan(&dir.corpus.ids(), dir.vocab.len(), &refs, &cfg.plan, seed)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    save_plan(out, &plan)?;
    log::info!("plan: {} base genes, {} stages", plan.base.len(), plan.n_stages);
    Ok(())
}
