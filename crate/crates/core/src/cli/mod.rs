//! `splatoff` command line front end.
//!
//! Every subcommand writes `manifest.toml` into its output directory with the
//! fully resolved arguments, so a run can be repeated from its manifest.
//! Exit codes: 0 success, 2 configuration error, 3 capacity error, 4 I/O or
//! malformed-file error.

mod commands;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::schedule::{OrderStrategy, SearchBudget};
use crate::sim::Mode;
use crate::train::{AdamTiming, UntouchedPolicy};
use crate::{Error, Result};

pub use commands::select_batch;

#[derive(Debug, Parser)]
#[command(name = "splatoff", version, about = "Sparsity-guided offloading planner, simulator and mini trainer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene from a TOML spec.
    GenScene(GenSceneArgs),
    /// Cull every view and report per-view sparsity and its CDF.
    Analyze(AnalyzeArgs),
    /// Order one batch and write its transfer plan and volume report.
    Plan(PlanArgs),
    /// Simulate a saved plan on the pipeline model.
    Simulate(SimulateArgs),
    /// Train with the offloaded pipeline and write a checkpoint.
    Train(TrainArgs),
    /// Compare every ordering strategy and the naive baseline.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenSceneArgs {
    /// Scene spec TOML.
    #[arg(long)]
    pub spec: PathBuf,
    /// Overrides the spec's Gaussian count.
    #[arg(long)]
    pub gaussians: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long, default_value_t = 3.0)]
    pub k: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OrderingArgs {
    #[arg(long, default_value_t = 3.0)]
    pub k: f64,
    /// Views per batch; defaults to every view of the scene.
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long, default_value = "tsp")]
    pub strategy: OrderStrategy,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Wall-clock local-search budget.
    #[arg(long, default_value_t = 1.0)]
    pub budget_ms: f64,
    /// Evaluation-count budget; replaces the wall-clock budget and makes
    /// ordering reproducible across machines.
    #[arg(long)]
    pub budget_moves: Option<u64>,
}

impl OrderingArgs {
    pub fn budget(&self) -> Result<SearchBudget> {
        match self.budget_moves {
            Some(m) => Ok(SearchBudget::Moves(m)),
            None if self.budget_ms >= 0.0 && self.budget_ms.is_finite() => {
                Ok(SearchBudget::WallClock(Duration::from_secs_f64(self.budget_ms / 1e3)))
            }
            None => Err(Error::config(format!("budget-ms must be non-negative, got {}", self.budget_ms))),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PlanArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub ordering: OrderingArgs,
    /// Which seeded batch of the scene's views to plan.
    #[arg(long, default_value_t = 0)]
    pub batch_index: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Plan directory written by `plan`.
    #[arg(long)]
    pub plan: PathBuf,
    /// Scene the plan must have been built from.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long)]
    pub cost_model: Option<PathBuf>,
    #[arg(long, default_value = "clm")]
    pub mode: Mode,
    /// Idle-fraction window in seconds; defaults to a twentieth of the makespan.
    #[arg(long)]
    pub window: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    /// Scene whose renders serve as targets unless `--targets` is given.
    #[arg(long)]
    pub scene: PathBuf,
    /// Directory of `view_<id>.spim` target images.
    #[arg(long)]
    pub targets: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub ordering: OrderingArgs,
    /// Total batches; a resumed run continues up to this count.
    #[arg(long, default_value_t = 10)]
    pub steps: u64,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Std of the seeded perturbation applied to the starting parameters.
    #[arg(long, default_value_t = 0.1)]
    pub perturb: f64,
    #[arg(long, default_value = "early", value_parser = parse_timing)]
    pub adam_timing: AdamTiming,
    #[arg(long, default_value = "skip", value_parser = parse_untouched)]
    pub untouched: UntouchedPolicy,
    /// Device arena size in bytes.
    #[arg(long)]
    pub device_capacity: Option<u64>,
    /// Checkpoint directory to resume from.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub ordering: OrderingArgs,
    /// Seeded batches summed into each row.
    #[arg(long, default_value_t = 1)]
    pub batches: u64,
    #[arg(long)]
    pub cost_model: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_timing(s: &str) -> std::result::Result<AdamTiming, String> {
    match s {
        "early" => Ok(AdamTiming::Early),
        "end-of-batch" => Ok(AdamTiming::EndOfBatch),
        _ => Err(format!("unknown adam timing {s:?}; expected early or end-of-batch")),
    }
}

fn parse_untouched(s: &str) -> std::result::Result<UntouchedPolicy, String> {
    match s {
        "skip" => Ok(UntouchedPolicy::Skip),
        "momentum-decay" => Ok(UntouchedPolicy::MomentumDecay),
        _ => Err(format!("unknown untouched policy {s:?}; expected skip or momentum-decay")),
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Inconsistent(_) => 2,
        Error::Capacity { .. } => 3,
        Error::Io { .. } | Error::Format { .. } => 4,
    }
}

/// Runs one parsed command.
pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenScene(a) => commands::gen_scene(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Plan(a) => commands::plan(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Train(a) => commands::train(a),
        Command::Compare(a) => commands::compare(a),
    }
}

/// Parses `args` (including the program name) and runs the command,
/// reporting errors on stderr.
pub fn run_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("splatoff: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn run() -> ExitCode {
    run_with(std::env::args_os())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct Manifest<'a, A: Serialize> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    args: &'a A,
    resolved: toml::Table,
}

fn write_manifest<A: Serialize>(out: &Path, command: &str, seed: u64, args: &A, resolved: toml::Table) -> Result<()> {
    let m = Manifest { command, version: env!("CARGO_PKG_VERSION"), seed, args, resolved };
    let text = toml::to_string(&m).map_err(|e| Error::config(format!("manifest: {e}")))?;
    write_text(&out.join("manifest.toml"), &text)
}
