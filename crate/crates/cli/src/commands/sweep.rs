use super::load_config;
use super::train::parse_replay_size;
use crate::args::SweepParam;
use gil_core::io::{merge_rows, read_results, write_results};
use gil_core::{GilError, Result, StrategyConfig};
use std::ffi::{OsStr, OsString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

const RESULTS_FILE: &str = "results.csv";

struct Job {
    strategy: StrategyConfig,
    seed: u64,
    dir: PathBuf,
}

fn worker_count() -> usize {
    std::env::var("GIL_THREADS").ok().and_then(|v| v.parse().ok()).filter(|&n| n > 0).unwrap_or(1)
}

fn step(args: Vec<OsString>, what: &str) -> Result<()> {
    let exe = std::env::current_exe()?;
    let status = Command::new(exe).args(args).status()?;
    match status.code() {
        Some(0) => Ok(()),
        Some(2) => Err(GilError::Data(format!("{what} failed"))),
        _ => Err(GilError::Config(format!("{what} failed with {status}"))),
    }
}

fn os_args(items: &[&dyn AsRef<OsStr>]) -> Vec<OsString> {
    items.iter().map(|a| a.as_ref().to_os_string()).collect()
}

fn run_job(job: &Job, plan: &Path, data: &Path, config: Option<&Path>) -> Result<()> {
    let seed = job.seed.to_string();
    let mut train = os_args(&[&"train", &"--plan", &plan, &"--data", &data, &"--seed", &seed, &"--out", &job.dir]);
    match (job.strategy.replay_buffer_per_stage, job.strategy.lambda) {
        (_, Some(l)) => train.extend(os_args(&[&"--strategy", &"distill", &"--lambda", &l.to_string()])),
        (size, None) => {
            let size = size.map_or("full".to_string(), |n| n.to_string());
            train.extend(os_args(&[&"--strategy", &"replay", &"--replay-size", &size]));
        }
    }
    if let Some(c) = config {
        train.extend(os_args(&[&"--config", &c]));
    }
    let label = job.dir.display().to_string();
    step(train, &format!("training {label}"))?;
    let results = job.dir.join(RESULTS_FILE);
    let eval = os_args(&[&"eval", &"--run", &job.dir, &"--plan", &plan, &"--data", &data, &"--out", &results]);
    step(eval, &format!("evaluating {label}"))
}

pub fn run(
    param: SweepParam,
    values: &[String],
    plan: &Path,
    data: &Path,
    out: &Path,
    config: Option<&Path>,
    seeds: &[u64],
) -> Result<()> {
    let cfg = load_config(config)?;
    let seeds = if seeds.is_empty() { vec![cfg.seeds[0]] } else { seeds.to_vec() };
    let mut jobs = Vec::new();
    for v in values {
        let strategy = match param {
            SweepParam::ReplaySize => StrategyConfig::replay(parse_replay_size(v)?),
            SweepParam::Lambda => StrategyConfig::distill(
                v.parse().map_err(|_| GilError::Usage(format!("lambda `{v}` is not a number")))?,
            ),
        };
        strategy.validate()?;
        for &seed in &seeds {
            let dir = out.join(format!("{}-s{seed}", strategy.label()));
            jobs.push(Job { strategy: strategy.clone(), seed, dir });
        }
    }
    std::fs::create_dir_all(out)?;

    let next = AtomicUsize::new(0);
    let failures = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..worker_count().min(jobs.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                if let Err(e) = run_job(job, plan, data, config) {
                    failures.lock().expect("no poisoning").push(e);
                }
            });
        }
    });
    if let Some(e) = failures.into_inner().expect("no poisoning").into_iter().next() {
        return Err(e);
    }

    let mut rows = Vec::new();
    for job in &jobs {
        rows = merge_rows(rows, read_results(&job.dir.join(RESULTS_FILE))?);
    }
    write_results(&out.join(RESULTS_FILE), &rows)
}
