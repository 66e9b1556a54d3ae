//! Command-line experiments on top of `latmm`.

pub mod commands;
pub mod reproduce;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use latmm::{ActionGrid, ModelParams, ParamsConfig, Truncation};
use serde::Serialize;

pub const DEFAULT_SEED: u64 = 20161003;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] latmm::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        use latmm::Error as E;
        match self {
            CliError::Model(e) => match e {
                E::InvalidParams(_) => "invalid_params",
                E::UndefinedEdge => "undefined_edge",
                E::InvalidRelPrice(_) => "invalid_rel_price",
                E::StateOutOfSpace(_) => "state_out_of_space",
                E::Inadmissible { .. } => "inadmissible",
                E::Unreachable(_) => "unreachable",
                E::Truncation(_) => "truncation",
                E::Policy(_) => "policy",
                E::Parse { .. } => "parse",
                E::Estimation(_) => "estimation",
                E::Io(_) => "io",
                E::Csv(_) => "csv",
                E::Json(_) => "json",
            },
            CliError::Io(_) => "io",
            CliError::Csv(_) => "csv",
            CliError::Json(_) => "json",
            CliError::Usage(_) => "usage",
        }
    }

    /// Machine-readable form printed on failure.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "latmm", version, about = "Market making under latency: order values, optimal quotes, simulation and estimation")]
pub struct Cli {
    /// Model configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Ask,
    Bid,
}

impl From<SideArg> for latmm::Side {
    fn from(s: SideArg) -> Self {
        match s {
            SideArg::Ask => latmm::Side::Ask,
            SideArg::Bid => latmm::Side::Bid,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Order values and fill probabilities over a range of quotes.
    OrderValue(OrderValueArgs),
    /// Backward induction: value surface, policy and summary.
    Solve,
    /// Simulate the optimal policy: one traced path plus an optional Monte Carlo check.
    Simulate(SimulateArgs),
    /// Regime, smallest profitable horizon and its upper bound.
    Profitability(ProfitabilityArgs),
    /// Estimate the jump and uninformed-flow rates from LOBSTER files.
    Estimate(EstimateArgs),
    /// Artificial-order replay estimate of the uninformed-flow ratio.
    Replay(ReplayArgs),
    /// Regenerate the published experiment tables.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct OrderValueArgs {
    #[arg(long, value_enum, default_value = "ask")]
    pub side: SideArg,
    /// Delay before the order rests (default: the latency).
    #[arg(long)]
    pub t1: Option<f64>,
    /// Resting time (default: period length minus latency).
    #[arg(long)]
    pub t2: Option<f64>,
    #[arg(long, default_value_t = -2, allow_hyphen_values = true)]
    pub rel_min: i32,
    #[arg(long, default_value_t = 8)]
    pub rel_max: i32,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Monte Carlo paths for the value check (0 to skip).
    #[arg(long, default_value_t = 0)]
    pub paths: usize,
}

#[derive(Debug, Args)]
pub struct ProfitabilityArgs {
    /// Largest horizon searched for the smallest profitable one.
    #[arg(long, default_value_t = 2000)]
    pub n_max: usize,
    /// Also sweep latency and flow rates at the configured horizon.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long, default_value_t = latmm::profitability::DEFAULT_TOL_POS)]
    pub tol_pos: f64,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long, requires = "orderbook")]
    pub messages: Option<PathBuf>,
    #[arg(long, requires = "messages")]
    pub orderbook: Option<PathBuf>,
    /// Synthetic data configuration (JSON) used when no files are given.
    #[arg(long)]
    pub synthetic: Option<PathBuf>,
    /// Also write the synthetic data as LOBSTER files.
    #[arg(long)]
    pub write_synthetic: bool,
    /// Tick size in LOBSTER price units.
    #[arg(long, default_value_t = 100)]
    pub tick: i64,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Count buyer- and seller-initiated flow separately instead of halving.
    #[arg(long)]
    pub side_resolved: bool,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Latencies in seconds.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub latency: Vec<f64>,
    #[arg(long, default_value_t = 500)]
    pub n_orders: usize,
    #[arg(long, value_enum, default_value = "bid")]
    pub side: SideArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Table2,
    Fig3,
    Fig4,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub experiment: Experiment,
}

/// Model parameters with the truncation and grid settings of a run.
#[derive(Clone, Debug, Serialize)]
pub struct Setup {
    pub params: ModelParams,
    pub truncation: Truncation,
    pub grid: ActionGrid,
}

/// Configuration used when `--config` is absent: the one-second quoting
/// example with 20 ms latency.
pub fn default_config() -> ParamsConfig {
    ParamsConfig {
        lambda_per_minute: Some(1.56),
        lambda_plus_per_minute: Some(0.875),
        lambda_minus_per_minute: Some(0.875),
        delta_tau: 0.02,
        delta_t: 1.0,
        horizon_t: 600.0,
        q_lo: -4,
        q_hi: 4,
        ..Default::default()
    }
}

pub fn load_setup(path: Option<&Path>) -> CliResult<Setup> {
    let cfg = match path {
        Some(p) => ParamsConfig::from_path(p)?,
        None => default_config(),
    };
    let params = cfg.to_params()?;
    let truncation = Truncation { r_max: cfg.r_max.unwrap_or(latmm::dpsolver::DEFAULT_R_MAX) };
    let grid = ActionGrid::new(
        cfg.grid_min.unwrap_or(latmm::dpsolver::DEFAULT_GRID_MIN),
        cfg.grid_max.unwrap_or(latmm::dpsolver::DEFAULT_GRID_MAX),
    );
    if grid.min > grid.max {
        return Err(CliError::Usage(format!("grid_min {} exceeds grid_max {}", grid.min, grid.max)));
    }
    Ok(Setup { params, truncation, grid })
}

/// Runs one command and returns the summary printed on stdout.
pub fn run(cli: &Cli) -> CliResult<serde_json::Value> {
    std::fs::create_dir_all(&cli.out)?;
    let go = || match &cli.command {
        Command::OrderValue(a) => commands::order_value(cli, a),
        Command::Solve => commands::solve(cli),
        Command::Simulate(a) => commands::simulate(cli, a),
        Command::Profitability(a) => commands::profitability(cli, a),
        Command::Estimate(a) => commands::estimate(cli, a),
        Command::Replay(a) => commands::replay(cli, a),
        Command::Reproduce(a) => reproduce::run(cli, a),
    };
    match cli.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {n} workers: {e}")))?;
            pool.install(go)
        }
        None => go(),
    }
}

pub(crate) fn write_csv<S: Serialize>(path: &Path, rows: &[S]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn write_json<S: Serialize>(path: &Path, v: &S) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_setup() {
        let s = load_setup(None).unwrap();
        assert_eq!(s.params.n_periods, 599);
        assert_eq!((s.params.q_lo, s.params.q_hi), (-4, 4));
        assert!((s.params.lambda_plus * 60.0 - 0.875).abs() < 1e-12);
    }

    #[test]
    fn error_json() {
        let e = CliError::from(latmm::Error::InvalidParams("x".into()));
        let v: serde_json::Value = serde_json::from_str(&e.to_json()).unwrap();
        assert_eq!(v["error"], "invalid_params");
        assert_eq!(v["message"], "invalid parameter: x");
    }

    #[test]
    fn parses_global_flags_after_subcommand() {
        let cli = Cli::try_parse_from(["latmm", "reproduce", "fig4", "--seed", "3", "--out", "x"]).unwrap();
        assert_eq!(cli.seed, 3);
        assert!(matches!(cli.command, Command::Reproduce(ReproduceArgs { experiment: Experiment::Fig4 })));
    }
}
