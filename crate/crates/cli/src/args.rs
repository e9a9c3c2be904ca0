use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::models::{EmbedderKind, FusionMode};

#[derive(Debug, Parser)]
#[command(
    name = "hybridcast",
    version,
    about = "Hybrid time-series forecasting toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags accepted by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Master seed; stage seeds are derived from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file (or directory, for multi-artifact commands).
    #[arg(long = "output", visible_alias = "out", short = 'o')]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic series from a spec or the skill presets.
    Simulate(SimulateArgs),
    /// Derive new series from existing ones.
    Augment(AugmentArgs),
    /// STL decomposition of every series in a file.
    Decompose(DecomposeArgs),
    /// Dataset mixture weights from a short DRO proxy training run.
    DroWeights(DroWeightsArgs),
    /// Train the transformer forecaster.
    TrainTsfm(TrainTsfmArgs),
    /// Forecast every series in a file with a trained transformer.
    Forecast(ForecastArgs),
    /// Fit a fusion of pool members.
    FuseTrain(FuseTrainArgs),
    /// Forecast with a fitted fusion.
    Fuse(FuseArgs),
    /// Distill s2 and run the s1/s2/large cascade.
    Coordinate(CoordinateArgs),
    /// Rolling-origin benchmark of model files.
    Evaluate(EvaluateArgs),
    /// Run every stage from one pipeline config.
    RunPipeline(RunPipelineArgs),
    /// Print version and default configurations.
    Info(InfoArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Synthetic series spec (one object or an array).
    #[arg(
        long,
        required_unless_present = "skill_suite",
        conflicts_with = "skill_suite"
    )]
    pub spec: Option<PathBuf>,
    /// Emit the labeled skill presets instead.
    #[arg(long)]
    pub skill_suite: bool,
    /// Series drawn per spec.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Strategy {
    Freq,
    Mbb,
    Dba,
    Mixup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregateArg {
    Mean,
    Sum,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long, value_enum)]
    pub strategy: Strategy,
    #[arg(long)]
    pub input: PathBuf,
    /// Aggregation factor (freq).
    #[arg(long, default_value_t = 2)]
    pub factor: usize,
    /// Aggregation (freq).
    #[arg(long, value_enum, default_value = "mean")]
    pub aggregate: AggregateArg,
    /// Seasonal period (mbb); each series' own period when absent.
    #[arg(long)]
    pub period: Option<usize>,
    /// Block length (mbb).
    #[arg(long, default_value_t = 8)]
    pub block_len: usize,
    /// Clusters (dba).
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Series per mixture (mixup).
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    /// Dirichlet concentration (mixup).
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Variants per series (mbb), per cluster (dba) or in total (mixup).
    #[arg(long, default_value_t = 4)]
    pub variants: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Seasonal period; each series' own period when absent.
    #[arg(long)]
    pub period: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct DroWeightsArgs {
    /// Directory with one file per dataset.
    #[arg(long, visible_alias = "data")]
    pub datasets: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    /// Proxy updates between weight updates.
    #[arg(long)]
    pub update_every: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct TrainTsfmArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Enable DRO dataset weighting with default settings unless the config
    /// provides them.
    #[arg(long)]
    pub dro: bool,
    #[arg(long)]
    pub steps: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub horizon: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct FuseTrainArgs {
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long, value_enum)]
    pub mode: FusionMode,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 12)]
    pub horizon: usize,
    /// Rolling origins per series used as training windows.
    #[arg(long, default_value_t = 8)]
    pub origins: usize,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Router input features; tsfm when the pool has a transformer member,
    /// else scale-free statistics.
    #[arg(long, value_enum)]
    pub embedder: Option<EmbedderKind>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long)]
    pub fusion: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Defaults to the horizon the fusion was fitted for.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CoordinateArgs {
    /// Fitted AR model (s1).
    #[arg(long)]
    pub s1: PathBuf,
    /// Large model file.
    #[arg(long)]
    pub large: PathBuf,
    /// Easy-sample threshold τ₁.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Challenging-sample threshold τ₂; τ₁ when absent.
    #[arg(long)]
    pub tau2: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub horizon: usize,
    /// Rolling origins per series used for distillation.
    #[arg(long, default_value_t = 8)]
    pub origins: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Comma-separated model files.
    #[arg(long, value_delimiter = ',', required = true)]
    pub models: Vec<PathBuf>,
    #[arg(long, required_unless_present = "skill_suite")]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    pub horizon: usize,
    #[arg(long, default_value_t = 4)]
    pub origins: usize,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Benchmark on the skill presets instead of `--data`.
    #[arg(long)]
    pub skill_suite: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct RunPipelineArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    #[command(flatten)]
    pub common: Common,
}
