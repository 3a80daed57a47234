use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "gil", version, about = "Gene incremental learning benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    #[value(name = "replay_size")]
    ReplaySize,
    Lambda,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus and labelled downstream sets.
    Datagen {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Select crucial genes and split genes and samples into stages.
    Plan {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train one strategy over all stages, writing a checkpoint per stage.
    Train {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        strategy: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        lambda: Option<f64>,
        /// Samples kept per earlier stage, or `full`.
        #[arg(long)]
        replay_size: Option<String>,
        /// A `stage_<k>.ckpt` file to continue from.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Gene-wise regression loss of every checkpoint of a run.
    Eval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Linear-probe accuracy of every checkpoint on a labelled dataset.
    Probe {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        downstream: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate one run per value of a strategy knob.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values; `full` is accepted for replay_size.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated seeds; defaults to the first configured seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
    /// Mean and median over seeds of result rows, one line per strategy.
    Report {
        /// Glob over result files or run directories.
        #[arg(long)]
        runs: String,
        #[arg(long)]
        out: PathBuf,
    },
}
