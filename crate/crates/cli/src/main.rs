//! `tel`: filtering, annotation synthesis, toy training, oracle verification
//! and benchmarks from the shell.
//!
//! Exit codes: 0 success, 1 invalid input or any other error, 2 a verification
//! check failed.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tel_core::losses::{Aggregation, Assignment};

#[derive(Debug, Parser)]
#[command(name = "tel", version, about = "Tree energy loss toolkit")]
pub struct Cli {
    /// Seed for every random choice (fixtures, initialization, sampled inputs).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads; defaults to one per core. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Edge-preserving smoothing with the minimum-spanning-tree filter.
    Filter(FilterArgs),
    /// Block-wise sparse labels: drop labeled pixels from region edges inward.
    SynthBlocks(SynthArgs),
    /// Train the toy per-pixel model on one image and log metrics.
    DemoTrain(TrainArgs),
    /// Run the oracle checks (dense filter, Kruskal, finite differences).
    Verify(VerifyArgs),
    /// Time tree construction, forward and backward filtering per grid size.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Image to filter: PNG, or a `.telt` tensor.
    #[arg(long)]
    pub input: PathBuf,
    /// Bandwidth of `t = exp(-ω/σ)`; larger values smooth across edges.
    #[arg(long)]
    pub sigma: f64,
    /// Image or tensor the tree is built on; defaults to the input.
    #[arg(long)]
    pub guide: Option<PathBuf>,
    /// Result path: `.telt` writes a tensor, anything else a PNG.
    #[arg(long)]
    pub output: PathBuf,
    /// Also write the all-pairs tree distance matrix as a `1×n×n` tensor
    /// (grids of at most 4096 pixels).
    #[arg(long)]
    pub dump_distance: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Dense label map (indexed or grayscale PNG; 255 = unlabeled).
    #[arg(long)]
    pub labels: PathBuf,
    /// Fraction of labeled pixels to keep, in (0, 1].
    #[arg(long)]
    pub ratio: f64,
    #[arg(long)]
    pub num_classes: usize,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FixtureName {
    TwoRegion,
    Checkerboard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregationArg {
    /// Low-level tree, then high-level tree.
    LhC,
    /// High-level tree, then low-level tree.
    HlC,
    /// Both trees on the prediction, averaged.
    LhP,
}

impl From<AggregationArg> for Aggregation {
    fn from(a: AggregationArg) -> Self {
        match a {
            AggregationArg::LhC => Aggregation::LowHighCascade,
            AggregationArg::HlC => Aggregation::HighLowCascade,
            AggregationArg::LhP => Aggregation::LowHighParallel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DeltaArg {
    L1,
    L2,
    Ce,
    Dot,
}

impl From<DeltaArg> for Assignment {
    fn from(d: DeltaArg) -> Self {
        match d {
            DeltaArg::L1 => Assignment::L1,
            DeltaArg::L2 => Assignment::L2,
            DeltaArg::Ce => Assignment::CrossEntropy,
            DeltaArg::Dot => Assignment::DotProduct,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Built-in synthetic scene. Use `--image` and `--labels` instead for your own data.
    #[arg(long, conflicts_with_all = ["image", "labels"], required_unless_present = "image")]
    pub fixture: Option<FixtureName>,
    /// RGB or grayscale PNG to train on.
    #[arg(long, requires = "labels")]
    pub image: Option<PathBuf>,
    /// Sparse labels for `--image` (255 = unlabeled).
    #[arg(long, requires = "image")]
    pub labels: Option<PathBuf>,
    /// Dense labels used only for scoring; defaults to `--labels`.
    #[arg(long, requires = "image")]
    pub truth: Option<PathBuf>,
    /// Number of classes for `--labels` and `--truth`.
    #[arg(long, default_value_t = 2)]
    pub num_classes: usize,
    /// Weight of the tree energy term; 0 trains on the sparse labels alone.
    #[arg(long, default_value_t = 0.4)]
    pub lambda: f64,
    /// Bandwidth of the low-level (color) tree.
    #[arg(long, default_value_t = 0.02)]
    pub sigma: f64,
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.0)]
    pub momentum: f64,
    #[arg(long, value_enum, default_value_t = AggregationArg::LhC)]
    pub aggregation: AggregationArg,
    #[arg(long, value_enum, default_value_t = DeltaArg::L1)]
    pub delta: DeltaArg,
    /// Treat the pseudo label as a constant target.
    #[arg(long)]
    pub detach: bool,
    /// Replace the tree term by hard cross-entropy on pixels whose pseudo
    /// label is more confident than this.
    #[arg(long)]
    pub naive_threshold: Option<f64>,
    /// Record metrics every this many steps.
    #[arg(long, default_value_t = 10)]
    pub eval_interval: usize,
    /// Metrics CSV path.
    #[arg(long)]
    pub metrics: PathBuf,
    /// Final prediction PNG; defaults to the metrics path with a `.png` extension.
    #[arg(long)]
    pub prediction: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Largest grid side in the dense-oracle comparison.
    #[arg(long, default_value_t = 64)]
    pub max_size: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Flip the sign of the analytic gradients; the run must then fail.
    #[arg(long)]
    pub inject_fault: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated grid sides.
    #[arg(long, value_delimiter = ',', default_value = "64,128,256,512")]
    pub sizes: Vec<usize>,
    /// Channels of the filtered tensor.
    #[arg(long, default_value_t = 21)]
    pub channels: usize,
    /// Timed repetitions per size; the fastest is reported.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long)]
    pub output: PathBuf,
}

/// What a successful run concluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Passed,
    VerificationFailed,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(Status::Passed) => ExitCode::SUCCESS,
        Ok(Status::VerificationFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
