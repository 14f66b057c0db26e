use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use diffmts_core::schedule::ScheduleKind;

use crate::config::{DataFormat, Variant};

/// Conditional diffusion for multivariate sensor time series.
#[derive(Debug, Parser)]
#[command(name = "diffmts", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic degradation dataset.
    GenData(GenDataArgs),
    /// Train a model on a dataset.
    Train(TrainArgs),
    /// Draw conditional samples from a checkpoint.
    Sample(SampleArgs),
    /// Score synthetic windows against real ones.
    Eval(EvalArgs),
    /// Build comparison tables and plot scripts.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Output dataset file; a `.json` sidecar is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub units: usize,
    #[arg(long, default_value_t = 14)]
    pub channels: usize,
    #[arg(long, default_value_t = 128)]
    pub min_cycles: usize,
    #[arg(long, default_value_t = 256)]
    pub max_cycles: usize,
    #[arg(long, default_value_t = 0.05)]
    pub noise_std: f64,
    #[arg(long, default_value_t = 1.0)]
    pub wave_scale: f64,
    /// Falls back to DIFFMTS_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = DataFormat::Auto)]
    pub format: DataFormat,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Run configuration (JSON). Flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training data; overrides `data.train_path`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory for the checkpoint, loss log and manifest.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Falls back to the config file, then DIFFMTS_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Diffusion steps T.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleArg>,
    #[arg(long, value_enum)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub window_length: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<DataFormat>,
    /// Continue from a checkpoint instead of starting fresh.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ScheduleArg {
    Cosine,
    Linear,
}

impl From<ScheduleArg> for ScheduleKind {
    fn from(s: ScheduleArg) -> Self {
        match s {
            ScheduleArg::Cosine => ScheduleKind::Cosine,
            ScheduleArg::Linear => ScheduleKind::Linear,
        }
    }
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Output CSV; the manifest goes to `<out>.manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated values, `@file`, or `match-dataset`.
    #[arg(long)]
    pub conditions: Option<String>,
    /// Number of samples. Without conditions they are spread evenly over
    /// [0, 1]; with a single condition it is repeated.
    #[arg(long)]
    pub count: Option<usize>,
    /// Dataset whose window conditions are replicated by `match-dataset`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long, default_value_t = diffmts_core::data::RUL_CAP)]
    pub rul_cap: f64,
    #[arg(long, value_enum, default_value_t = DataFormat::Auto)]
    pub format: DataFormat,
    /// Falls back to DIFFMTS_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Zero the condition embedding.
    #[arg(long)]
    pub guidance_off: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Real dataset (trajectories).
    #[arg(long)]
    pub real: PathBuf,
    /// Synthetic sample CSV.
    #[arg(long)]
    pub synth: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Run configuration whose `eval` and `data` sections are used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Evaluator training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<DataFormat>,
    /// Bound on the worker pool for distance computations.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// `variant[:column]=eval_report.json`, repeatable.
    #[arg(long = "entry")]
    pub entries: Vec<String>,
    /// Markdown table destination; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for gnuplot scripts.
    #[arg(long)]
    pub plots: Option<PathBuf>,
    #[arg(long)]
    pub loss: Option<PathBuf>,
    #[arg(long)]
    pub pca: Option<PathBuf>,
    #[arg(long)]
    pub samples: Option<PathBuf>,
}
