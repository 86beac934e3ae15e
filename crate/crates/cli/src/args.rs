use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "labelcal",
    version,
    about = "Label calibration for segmentation probability maps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit prototypes with one pass over a manifest's probability maps.
    Fit(FitArgs),
    /// Write a label map per entry, by argmax or nearest prototype.
    Predict(PredictArgs),
    /// Score prediction label maps against the manifest's ground truth.
    Eval(EvalArgs),
    /// Run the synthetic domain-shift experiment.
    Simulate(SimulateArgs),
    /// Time fit and both prediction modes on preloaded maps.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Shard the manifest over this many threads and merge.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Argmax,
    Calibrated,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Argmax => "argmax",
            Mode::Calibrated => "calibrated",
        }
    }
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Prototype file (.csv or .json); required in calibrated mode.
    #[arg(long)]
    pub protos: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Calibrated)]
    pub mode: Mode,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory of `<id>.pclm` predictions.
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated subset names; defaults to every subset of the label space.
    #[arg(long, value_delimiter = ',')]
    pub subsets: Vec<String>,
    /// Second prediction directory; deltas are reported as compare minus predictions.
    #[arg(long)]
    pub compare: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulation config JSON; the built-in boundary-confusion setup when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Run a single seed instead of the config's seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the generated maps and manifests under `<out>/dataset`.
    #[arg(long)]
    pub export: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    pub reps: u32,
    #[arg(long)]
    pub out: PathBuf,
    /// Dataset multiples to time the fit at; entries are cycled to reach each size.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub scales: Vec<u32>,
}
