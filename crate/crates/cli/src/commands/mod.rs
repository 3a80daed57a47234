mod datagen;
mod eval;
mod plan;
mod probe;
mod report;
mod sweep;
mod train;

use crate::args::Command;
use gil_core::io::{merge_rows, read_results, write_results, ResultRow};
use gil_core::{ExperimentConfig, GilError, Result};
use std::path::Path;

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Datagen { config, out, seed } => datagen::run(config.as_deref(), &out, seed),
        Command::Plan { data, config, out, seed } => plan::run(&data, config.as_deref(), &out, seed),
        Command::Train { plan, data, strategy, seed, out, config, lambda, replay_size, resume } => {
            train::run(train::TrainArgs {
                plan: &plan,
                data: &data,
                strategy: &strategy,
                seed,
                out: &out,
                config: config.as_deref(),
                lambda,
                replay_size: replay_size.as_deref(),
                resume: resume.as_deref(),
            })
        }
        Command::Eval { run, plan, data, out } => eval::run(&run, &plan, &data, &out),
        Command::Probe { run, downstream, out } => probe::run(&run, &downstream, &out),
        Command::Sweep { param, values, plan, data, out, config, seeds } => {
            sweep::run(param, &values, &plan, &data, &out, config.as_deref(), &seeds)
        }
        Command::Report { runs, out } => report::run(&runs, &out),
    }
}

pub(crate) fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

/// Writes `rows` to `path`, keeping unrelated rows already there.
pub(crate) fn merge_into(path: &Path, rows: Vec<ResultRow>) -> Result<()> {
    let existing = if path.exists() { read_results(path)? } else { vec![] };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_results(path, &merge_rows(existing, rows))
}

pub(crate) fn run_id(run: &Path) -> Result<String> {
    run.file_name()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| GilError::Usage(format!("cannot name run {}", run.display())))
}
