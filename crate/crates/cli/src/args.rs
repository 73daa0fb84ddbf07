use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const DEFAULT_SEED: u64 = 20_160_807;

#[derive(Debug, Parser)]
#[command(
    name = "ergobound",
    version,
    about = "Hoeffding-type tail bounds for time averages of ergodic diffusions, with Monte Carlo verification"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Seed of the per-path random streams.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Write the result here instead of stdout; a `<out>.manifest.json`
    /// replay manifest is written next to it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format. Single results default to JSON, grids to CSV.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for path simulation (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the tail bound from its four constants.
    #[command(allow_negative_numbers = true)]
    Bound(BoundArgs),
    /// Occupation-time bound for the Jacobi process.
    #[command(allow_negative_numbers = true)]
    JacobiBound(JacobiBoundArgs),
    /// Bound for the exponential functional of the tan-OU process (rho = 1/2).
    #[command(allow_negative_numbers = true)]
    TanouBound(TanouBoundArgs),
    /// Decide uniform ergodicity by the integral and spectral criteria.
    #[command(allow_negative_numbers = true)]
    Check(ModelOnly),
    /// Average hitting time via the eigentime identity.
    #[command(allow_negative_numbers = true)]
    Tav(ModelOnly),
    /// Space average pi(f) under the stationary law.
    #[command(allow_negative_numbers = true)]
    Pi(ModelAndObservable),
    /// Solve the Poisson equation on a grid and compare sup|Q f| with 2 t_av |f|.
    #[command(allow_negative_numbers = true)]
    Poisson(PoissonArgs),
    /// Euler-Maruyama ensembles: time averages, hitting times, histograms.
    #[command(allow_negative_numbers = true)]
    Simulate(SimulateArgs),
    /// Check the bound against Monte Carlo tail estimates on a (t, eps) grid.
    #[command(allow_negative_numbers = true)]
    Verify(VerifyArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub t: f64,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub f_norm: f64,
    #[arg(long)]
    pub q_norm: f64,
}

#[derive(Debug, Clone, Args)]
pub struct JacobiBoundArgs {
    #[arg(long)]
    pub t: f64,
    #[arg(long)]
    pub eps: f64,
    /// Average hitting time; computed from --b and --sigma2 when omitted.
    #[arg(long, conflicts_with_all = ["b", "sigma2"])]
    pub t_av: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TanouBoundArgs {
    #[arg(long)]
    pub t: f64,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub u: f64,
    /// Use |f| = e^{u pi/2} and pi(f) = 2 cosh(u pi/2)/(1+u^2).
    #[arg(long)]
    pub paper_constant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Jacobi,
    Tanou,
    Maoclass,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "jacobi")]
    pub model: ModelKind,
    /// JSON model description; overrides --model and its parameters.
    #[arg(long)]
    pub model_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 2.0)]
    pub b: f64,
    #[arg(long, default_value_t = 2.0)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, default_value_t = 3.0)]
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FKind {
    Const,
    Indicator,
    Exp,
    Identity,
    Sin,
    Cos,
}

#[derive(Debug, Clone, Args)]
pub struct ObservableArgs {
    /// Observable; defaults to the indicator of (lo, hi) for Jacobi and
    /// e^{ux} for tan-OU.
    #[arg(long = "f", value_enum)]
    pub f: Option<FKind>,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lo: f64,
    #[arg(long, default_value_t = 0.5)]
    pub hi: f64,
    #[arg(long, default_value_t = 1.0)]
    pub u: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ModelOnly {
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ModelAndObservable {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub observable: ObservableArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PoissonArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub observable: ObservableArgs,
    /// Grid size.
    #[arg(long, default_value_t = 4096)]
    pub n: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long)]
    pub paths: Option<u64>,
    /// Starting point (default: interval midpoint).
    #[arg(long)]
    pub x0: Option<f64>,
    /// Project onto [l + delta, u - delta] instead of the model's default
    /// boundary handling.
    #[arg(long, conflicts_with = "reflect")]
    pub clamp: Option<f64>,
    /// Fold paths back across finite endpoints.
    #[arg(long)]
    pub reflect: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimMode {
    /// Time averages of f at horizon t.
    Functional,
    /// Average hitting time with start and target drawn from the stationary law.
    HittingTime,
    /// Occupation histogram (bounded intervals).
    Histogram,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub observable: ObservableArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, value_enum, default_value = "functional")]
    pub mode: SimMode,
    /// Horizon.
    #[arg(long, default_value_t = 100.0)]
    pub t: f64,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub observable: ObservableArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Horizons of the grid.
    #[arg(long, value_delimiter = ',', default_values_t = [100.0, 200.0, 400.0])]
    pub t: Vec<f64>,
    /// Deviation thresholds of the grid.
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.1, 0.2])]
    pub eps: Vec<f64>,
    /// Confidence parameter of the Clopper-Pearson limit.
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    /// tan-OU exponential functional only: use the constants.
    #[arg(long)]
    pub paper_constant: bool,
    /// Multiply every bound by this factor (harness self-test).
    #[arg(long, hide = true, default_value_t = 1.0)]
    pub bound_scale: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write the replayed output here instead of the recorded path.
    #[arg(long = "to")]
    pub to: Option<PathBuf>,
}
