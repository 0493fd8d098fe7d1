use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "alloss",
    version,
    about = "Adaptive logarithmic loss benchmark harness",
    args_override_self = true,
    after_help = "Exit codes: 0 success, 1 usage error, 2 data error, 3 check failure.\n\
                  Every flag can also be set as `flag=value` in a --config file; flags win."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the wrapper and its derivative over base-loss values in [0, 1].
    Curve(CurveArgs),
    /// Sweep wrapper hyperparameters, training one model per cell and seed.
    Grid(GridArgs),
    /// Train one model per loss and seed and report validation metrics.
    Compare(CompareArgs),
    /// Pooled-pixel validation ROC of a freshly trained or untrained model.
    Roc(RocArgs),
    /// Check analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Write a synthetic dataset as PGM pairs plus manifest.csv.
    Gendata(GendataArgs),
    /// Train one model and write its per-epoch record.
    Train(TrainArgs),
}

/// A comma-separated list taken as one value, so a later flag replaces it.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatList(pub Vec<f64>);

fn float_list(s: &str) -> Result<FloatList, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
        .collect::<Result<_, _>>()
        .map(FloatList)
}

#[derive(Debug, Args)]
pub struct Common {
    /// Base seed for model initialization and batch order.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat key=value config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads for independent runs.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossName {
    Jaccard,
    Dice,
    Tversky,
    Focal,
    Combo,
    FocalTversky,
}

#[derive(Debug, Args)]
pub struct WrapArgs {
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    #[arg(long, default_value_t = 10.0)]
    pub omega: f64,
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    #[arg(long, value_enum, default_value_t = LossName::Dice)]
    pub loss: LossName,
    /// Wrap the base loss in the adaptive logarithmic loss.
    #[arg(long)]
    pub all_wrap: bool,
    #[command(flatten)]
    pub wrap: WrapArgs,
    #[command(flatten)]
    pub base: BaseLossArgs,
}

/// Parameters of the individual base losses.
#[derive(Debug, Args)]
pub struct BaseLossArgs {
    #[arg(long, default_value_t = 1e-6)]
    pub smooth: f64,
    #[arg(long, default_value_t = 0.7)]
    pub tversky_alpha: f64,
    #[arg(long, default_value_t = 0.3)]
    pub tversky_beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub focal_alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    pub focal_gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    pub combo_mix: f64,
    #[arg(long, default_value_t = 4.0 / 3.0)]
    pub ft_gamma: f64,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Load samples from a gendata manifest instead of generating them.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    pub width: usize,
    #[arg(long, default_value_t = 32)]
    pub height: usize,
    #[arg(long, default_value_t = 0.05)]
    pub fg_fraction: f64,
    #[arg(long, default_value_t = 80)]
    pub n_images: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 1)]
    pub blobs_min: usize,
    #[arg(long, default_value_t = 3)]
    pub blobs_max: usize,
    /// Seed of the synthetic dataset.
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    /// Training fraction of the train/validation split.
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
}

#[derive(Debug, Args)]
pub struct OptimArgs {
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub wrap: WrapArgs,
    #[arg(long, default_value_t = 101)]
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// ω ∈ {6..16} × ε ∈ {0.3, 0.5, 1, 2} at γ = 0.1.
    OmegaEpsilon,
    /// γ ∈ {0.08 .. 0.30} at ω = 10, ε = 0.5.
    Gamma,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = Preset::OmegaEpsilon)]
    pub preset: Preset,
    /// Overrides the preset's γ list.
    #[arg(long, value_parser = float_list)]
    pub gammas: Option<FloatList>,
    #[arg(long, value_parser = float_list)]
    pub omegas: Option<FloatList>,
    #[arg(long, value_parser = float_list)]
    pub epsilons: Option<FloatList>,
    /// Runs per cell.
    #[arg(long, default_value_t = 3)]
    pub seeds: usize,
    /// Base loss under the wrapper.
    #[arg(long, value_enum, default_value_t = LossName::Dice)]
    pub loss: LossName,
    #[command(flatten)]
    pub base: BaseLossArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated losses; prefix `all-` wraps a loss, `all` is the wrapped Dice loss.
    #[arg(long, default_value = "jaccard,dice,tversky,focal,combo,all-dice")]
    pub losses: String,
    #[arg(long, default_value_t = 5)]
    pub seeds: usize,
    /// Per-epoch trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
}

#[derive(Debug, Args)]
pub struct RocArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub loss: LossArgs,
    /// Skip training: all-zero weights score every pixel 0.5.
    #[arg(long)]
    pub untrained: bool,
    #[arg(long, default_value_t = 256)]
    pub thresholds: usize,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub loss: LossArgs,
    /// Check all six base losses, plain and wrapped, instead of --loss.
    #[arg(long)]
    pub every_loss: bool,
    /// Random (p, g) pairs per loss.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Random networks per loss.
    #[arg(long, default_value_t = 20)]
    pub net_trials: usize,
    /// Maximum relative error at loss level.
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
    /// Maximum relative error through the network.
    #[arg(long, default_value_t = 1e-4)]
    pub net_tolerance: f64,
    /// Deliberately corrupt analytic gradients (checker self-test).
    #[arg(long, hide = true)]
    pub corrupt: bool,
}

#[derive(Debug, Args)]
pub struct GendataArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub loss: LossArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
}
