use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "qpush",
    version,
    about = "Virtual-queue convex solver experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one instance and write its trace.
    Run(RunArgs),
    /// Solve one instance and check the finite-time bounds against a reference.
    Verify(VerifyArgs),
    /// Paired run of the virtual-queue method and the dual subgradient baseline.
    Bench(BenchArgs),
    /// Draw a convergence plot from a saved trace.csv.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    /// Virtual-queue proximal method.
    Vq,
    /// Dual subgradient with primal averaging.
    Dsg,
}

/// `--alpha <value|auto>`; `auto` is `β²/2 + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaChoice {
    Auto,
    Value(f64),
}

impl FromStr for AlphaChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(AlphaChoice::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(AlphaChoice::Value(v)),
            _ => Err(format!("expected a positive number or 'auto', got '{s}'")),
        }
    }
}

impl fmt::Display for AlphaChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaChoice::Auto => f.write_str("auto"),
            AlphaChoice::Value(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Bundled instance: fig1-num, fig1-flow-power, qp, qp(seed=N).
    #[arg(long, conflicts_with_all = ["problem_file", "topology"])]
    pub problem: Option<String>,
    /// JSON problem file with linear constraints.
    #[arg(long, conflicts_with = "topology")]
    pub problem_file: Option<PathBuf>,
    /// JSON network description; solved as a utility maximization.
    #[arg(long)]
    pub topology: Option<PathBuf>,
    /// Seed for the random QP.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON array with the starting point; zeros by default.
    #[arg(long)]
    pub x_init: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long, value_enum, default_value_t = Algo::Vq)]
    pub algo: Algo,
    /// Penalty parameter, or `auto` for β²/2 + 1.
    #[arg(long, default_value = "auto")]
    pub alpha: AlphaChoice,
    /// Step size of the dual subgradient baseline.
    #[arg(long, default_value_t = 0.01)]
    pub gamma: f64,
    /// Number of iterations.
    #[arg(long = "T", short = 'T', default_value_t = 10_000)]
    pub iterations: usize,
    /// Record every k-th iteration (default: all up to 1000, else T/1000).
    #[arg(long)]
    pub record_every: Option<usize>,
    /// Run network problems as per-link / per-source agents.
    #[arg(long)]
    pub agents: bool,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output directory.
    #[arg(long, env = "QPUSH_OUT", default_value = "out")]
    pub out: PathBuf,
    /// Also write every iterate and queue vector to trace_full.csv.
    #[arg(long)]
    pub full_trace: bool,
    /// Also write convergence.svg.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solve: SolveArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Check the finite-time bounds; takes a reference JSON file, or uses
    /// the bundled reference when given without a value.
    #[arg(long, num_args = 0..=1, default_missing_value = "")]
    pub verify_bounds: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solve: SolveArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Reference file `{f_star, x_star, lambda_star, beta}`; bundled
    /// instances fall back to their own reference.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Absolute slack allowed on every bound.
    #[arg(long, default_value_t = 1e-9)]
    pub slack: f64,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value = "auto")]
    pub alpha: AlphaChoice,
    #[arg(long, default_value_t = 0.01)]
    pub gamma: f64,
    #[arg(long = "T", short = 'T', default_value_t = 10_000)]
    pub iterations: usize,
    #[arg(long, env = "QPUSH_OUT", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    /// trace.csv to draw.
    #[arg(long)]
    pub trace: PathBuf,
    /// Second trace drawn on the same axes, e.g. the baseline.
    #[arg(long)]
    pub overlay: Option<PathBuf>,
    /// Optimal value in minimization form; read from summary.json next to
    /// the trace when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub f_star: Option<f64>,
    /// Output file (default: convergence.svg next to the trace).
    #[arg(long)]
    pub output: Option<PathBuf>,
}
