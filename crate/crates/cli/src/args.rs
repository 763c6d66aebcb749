use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "ldpcl", version, args_override_self = true, about = "Two-sided LDPC ensembles with local and joint checks")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalArgs {
    /// Directory receiving every artifact of the run.
    #[arg(long, global = true, default_value = "ldpcl-out")]
    pub out: PathBuf,

    #[arg(long, global = true, default_value_t = ldpcl::reproduce::DEFAULT_SEED)]
    pub seed: u64,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,

    /// Skip the Monte Carlo and long-code bounds in `reproduce`.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub quick: bool,

    /// JSON file with the same keys as the flags, plus "subcommand".
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(untagged)]
pub enum Command {
    /// Local and global thresholds plus fixed points.
    Threshold(ThresholdArgs),
    /// Attach a joint code to a local code so the global threshold hits a target.
    Construct(ConstructArgs),
    /// LP design of the local degree distributions.
    LpDesign(LpDesignArgs),
    /// Joint-iteration count of a schedule.
    Schedule(ScheduleArgs),
    /// Finite-length ML union bounds.
    Mlbound(MlboundArgs),
    /// Monte Carlo peeling decoder.
    Simulate(SimulateArgs),
    /// Two-sided DE trajectory.
    DeTrace(DeTraceArgs),
    /// Recompute the reference operating points and check them.
    Reproduce(ReproduceArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Threshold(_) => "threshold",
            Self::Construct(_) => "construct",
            Self::LpDesign(_) => "lp-design",
            Self::Schedule(_) => "schedule",
            Self::Mlbound(_) => "mlbound",
            Self::Simulate(_) => "simulate",
            Self::DeTrace(_) => "de-trace",
            Self::Reproduce(_) => "reproduce",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
#[group(required = true, multiple = false, id = "source")]
pub struct SourceArgs {
    /// Ensemble JSON file.
    #[arg(long, group = "source")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<PathBuf>,

    /// Regular degrees `lL:rL:lJ:rJ`.
    #[arg(long, group = "source")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regular: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SizeArgs {
    /// Number of sub-blocks (overrides the ensemble file).
    #[arg(long = "M")]
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub m_blocks: Option<usize>,

    /// Sub-block length (overrides the ensemble file).
    #[arg(long = "n")]
    #[serde(rename = "n", skip_serializing_if = "Option::is_none")]
    pub n_sub: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Formula,
    Bisect,
    Both,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ThresholdArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,

    #[arg(long, value_enum, default_value = "both")]
    pub method: Method,

    /// Bisection tolerance.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,

    /// Erasure probability at which fixed points are listed (default: the global threshold).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Tornado,
    Regular,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Recipe {
    /// Joint threshold `eps_G a_s(eps_G)` for the given local code.
    Stuck,
    /// Joint Tornado code tuned to `eps_G` itself, as in the capacity sequence.
    Capacity,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConstructArgs {
    #[arg(long = "eps-local")]
    #[serde(rename = "eps-local")]
    pub eps_local: f64,

    #[arg(long = "eps-global")]
    #[serde(rename = "eps-global")]
    pub eps_global: f64,

    /// Joint code family.
    #[arg(long, value_enum, default_value = "tornado")]
    pub family: Family,

    /// Tornado parameter of the local code.
    #[arg(long, default_value_t = 5)]
    pub dl: u32,

    /// Tornado parameter of the joint code.
    #[arg(long, default_value_t = 100)]
    pub dj: u32,

    #[arg(long, value_enum, default_value = "stuck")]
    pub recipe: Recipe,

    #[command(flatten)]
    #[serde(flatten)]
    pub size: SizeArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LpDesignArgs {
    #[arg(long = "eps-local")]
    #[serde(rename = "eps-local")]
    pub eps_local: f64,

    #[arg(long = "eps-global")]
    #[serde(rename = "eps-global")]
    pub eps_global: f64,

    #[arg(long, default_value_t = 8)]
    pub lmax: u32,

    #[arg(long, default_value_t = 12)]
    pub rmax: u32,

    /// Stuck-point targets `a:b:step`.
    #[arg(long = "xs-grid", default_value = "0.05:0.3:0.05")]
    #[serde(rename = "xs-grid")]
    pub xs_grid: String,

    /// Constraint grid points per interval.
    #[arg(long, default_value_t = ldpcl::lp::design::DEFAULT_GRID)]
    pub grid: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScheduleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,

    #[arg(long)]
    pub eps: f64,

    /// ideal, eta, eta-latest, flooding, never, period:k or fixed:i,j,...
    #[arg(long, default_value = "ideal")]
    pub policy: String,

    /// Gate of the eta policies.
    #[arg(long, default_value_t = 1e-4)]
    pub eta: f64,

    #[arg(long = "max-iters", default_value_t = ldpcl::density_evolution::DEFAULT_MAX_ITERS)]
    #[serde(rename = "max-iters")]
    pub max_iters: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MlboundArgs {
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub m_blocks: usize,

    #[arg(long = "n")]
    pub n: usize,

    #[arg(long = "lL")]
    #[serde(rename = "lL")]
    pub l_l: u32,

    #[arg(long = "rL")]
    #[serde(rename = "rL")]
    pub r_l: u32,

    #[arg(long = "lJ")]
    #[serde(rename = "lJ")]
    pub l_j: u32,

    #[arg(long = "rJ")]
    #[serde(rename = "rJ")]
    pub r_j: u32,

    /// `a:b:step`.
    #[arg(long, default_value = "0.05:0.5:0.05")]
    pub eps: String,

    /// Single `(l, r)` code of length `M n` for comparison, `l:r`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<String>,

    /// Work budget of one bound evaluation.
    #[arg(long = "max-ops", default_value_t = ldpcl::finite_length::DEFAULT_MAX_OPS)]
    #[serde(rename = "max-ops")]
    pub max_ops: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Local,
    Global,
    Both,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,

    #[command(flatten)]
    #[serde(flatten)]
    pub size: SizeArgs,

    /// `a:b:step`.
    #[arg(long)]
    pub eps: String,

    #[arg(long, default_value_t = 200)]
    pub trials: usize,

    /// eta, eta-latest, flooding, never, period:k or fixed:i,j,...
    #[arg(long, default_value = "flooding")]
    pub policy: String,

    #[arg(long, default_value_t = 1e-4)]
    pub eta: f64,

    #[arg(long, value_enum, default_value = "both")]
    pub mode: Mode,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DeTraceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,

    #[arg(long)]
    pub eps: f64,

    #[arg(long = "max-iters", default_value_t = ldpcl::density_evolution::DEFAULT_MAX_ITERS)]
    #[serde(rename = "max-iters")]
    pub max_iters: u64,

    #[arg(long = "halt-tol", default_value_t = ldpcl::density_evolution::DEFAULT_HALT_TOL)]
    #[serde(rename = "halt-tol")]
    pub halt_tol: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReproduceArgs {
    /// Run only this criterion (1 to 10).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=10))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criterion: Option<u8>,
}
