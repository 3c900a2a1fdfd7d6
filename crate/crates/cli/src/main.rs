//! `tubetopo` command-line tool.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "tubetopo",
    version,
    about = "Topology-aware tooling for tubular segmentation masks"
)]
pub struct Cli {
    /// JSON file with default settings; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic vessel images, masks and perturbed masks.
    Synth(SynthArgs),
    /// Score predicted masks against ground truth as CSV.
    Metrics(MetricsArgs),
    /// Build a topology question/answer dataset, or audit one.
    Taskgen(TaskgenArgs),
    /// Train the flow refiner.
    Train(TrainArgs),
    /// Refine imperfect masks with a trained checkpoint and score them.
    Refine(RefineArgs),
    /// Print Betti numbers and Euler characteristic of one mask.
    Topology(TopologyArgs),
}

/// Overrides for the vessel generator.
#[derive(Debug, Clone, Default, Args)]
pub struct VesselArgs {
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub loops: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub branch_prob: Option<f64>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub radius_min: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PerturbArg {
    Disconnect,
    Merge,
    Hole,
    DilateNoise,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Perturbation applied to each ground truth (repeatable).
    #[arg(long, value_enum)]
    pub perturb: Vec<PerturbArg>,
    /// Number of defects per perturbation.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[command(flatten)]
    pub vessel: VesselArgs,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Predicted mask, or directory of masks.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth mask, or directory with matching file names.
    #[arg(long)]
    pub gt: PathBuf,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TaskgenArgs {
    #[arg(long, value_name = "DIR", required_unless_present = "verify")]
    pub out: Option<PathBuf>,
    /// Audit an existing manifest instead of generating one.
    #[arg(long, value_name = "MANIFEST", conflicts_with = "out")]
    pub verify: Option<PathBuf>,
    #[arg(long)]
    pub train_per_kind: Option<usize>,
    #[arg(long)]
    pub test_per_kind: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub vessel: VesselArgs,
}

/// Where training or evaluation triples come from.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct TripleSource {
    /// Taskgen manifest; its refinement records are used.
    #[arg(long, value_name = "MANIFEST")]
    pub manifest: Option<PathBuf>,
    /// Generate this many synthetic triples instead.
    #[arg(long, value_name = "N")]
    pub synth: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub source: TripleSource,
    /// Checkpoint destination; the loss curve is written next to it.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Train without error-adaptive weights (lambda = 0).
    #[arg(long, conflicts_with = "lambda")]
    pub no_adaptive: bool,
    #[arg(long)]
    pub patch_size: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub vessel: VesselArgs,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub source: TripleSource,
    /// Euler steps of the sampler.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-sample CSV of refined masks; the input/refined summary is printed.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for the refined masks.
    #[arg(long, value_name = "DIR")]
    pub masks: Option<PathBuf>,
    #[command(flatten)]
    pub vessel: VesselArgs,
}

#[derive(Debug, Args)]
pub struct TopologyArgs {
    pub mask: PathBuf,
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
    match std::panic::catch_unwind(|| commands::run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
        Err(_) => ExitCode::from(3),
    }
}
