//! Command-line flags, the optional JSON config file and their merge.
//!
//! Every flag may also be given in the config file under its long name
//! (`{"delta": 2, "delta-prime": 4, "seed": 7}`); a flag on the command line
//! wins over the file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Parser)]
#[command(
    name = "bessel-bel",
    version,
    about = "Bessel-process semigroup derivatives: kernels, path simulation and Monte Carlo verification",
    after_help = "Exit codes: 0 all checks passed, 1 usage or configuration error, \
                  2 a quantitative check failed, 3 only inconclusive results.\n\
                  The seed defaults to $BESSEL_BEL_SEED, then 0."
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Global {
    /// JSON file supplying any flag by its long name
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Random seed (unsigned 64-bit)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Report file; nothing is written without it
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Report format: csv or jsonl [default: csv]
    #[arg(long, global = true, value_parser = ["csv", "jsonl"])]
    pub format: Option<String>,
    /// Worker threads (>= 1) [default: logical CPU count]
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transition density p_T(x, y), or the atom and density at delta = 0
    Density(DensityArgs),
    /// P_T F(x) by quadrature
    Semigroup(PointArgs),
    /// d/dx P_T F(x): analytic, finite difference and, with --n, Monte Carlo
    Derivative(PointArgs),
    /// BEL Monte Carlo estimate against the analytic derivative
    BelMc(PointArgs),
    /// Change-of-dimension identity E[F(rho_T) W_T] = P^{delta'}_T F(x)
    RnCheck(RnArgs),
    /// E[D_t] = x on a time grid
    Martingale(MartingaleArgs),
    /// Moments and Hill tail index of D_T against p(delta)
    Moments(MomentsArgs),
    /// Coupled flows from x < y driven by the same noise
    Flow(FlowArgs),
    /// Hitting time scaling T0(y)/y^2 ~ T0(1); at delta = 0 also the absorption law
    Scaling(ScalingArgs),
    /// Ornstein-Uhlenbeck baseline with exact Gaussian derivative
    Baseline(BaselineArgs),
    /// Run the acceptance matrix
    FullSuite(SuiteArgs),
}

/// Test function selection shared by several commands.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct FArgs {
    /// Test function: one, exp_neg_y2, laplace, cauchy, indicator_0_a, tanh
    #[arg(long)]
    pub f: Option<String>,
    /// Endpoint a > 0 of indicator_0_a
    #[arg(long)]
    pub a: Option<f64>,
    /// Rate lambda >= 0 of laplace
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct DensityArgs {
    /// Dimension delta >= 0
    #[arg(long)]
    pub delta: Option<f64>,
    /// Start x >= 0
    #[arg(long)]
    pub x: Option<f64>,
    /// Horizon T > 0
    #[arg(long)]
    pub t: Option<f64>,
    /// Endpoint y >= 0
    #[arg(long)]
    pub y: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct PointArgs {
    /// Dimension delta >= 0 (bel-mc: > 0)
    #[arg(long)]
    pub delta: Option<f64>,
    /// Start x >= 0 (Monte Carlo: > 0)
    #[arg(long)]
    pub x: Option<f64>,
    /// Horizon T > 0
    #[arg(long)]
    pub t: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub f: FArgs,
    /// Monte Carlo paths (>= 2)
    #[arg(long)]
    pub n: Option<usize>,
    /// Euler step dt > 0 [default: 1e-3]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Finite-difference step h > 0 [default: 1e-4]
    #[arg(long)]
    pub h: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct RnArgs {
    /// Simulated dimension delta >= 0
    #[arg(long)]
    pub delta: Option<f64>,
    /// Target dimension delta' >= max(delta, 2)
    #[arg(long)]
    pub delta_prime: Option<f64>,
    /// Start x > 0
    #[arg(long)]
    pub x: Option<f64>,
    /// Horizon T > 0
    #[arg(long)]
    pub t: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub f: FArgs,
    /// Monte Carlo paths (>= 2)
    #[arg(long)]
    pub n: Option<usize>,
    /// Euler step dt > 0 [default: 1e-3]
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct MartingaleArgs {
    /// Dimension delta >= 0
    #[arg(long)]
    pub delta: Option<f64>,
    /// Start x > 0
    #[arg(long)]
    pub x: Option<f64>,
    /// Comma-separated times, each a multiple of dt
    #[arg(long, value_delimiter = ',')]
    pub t_grid: Option<Vec<f64>>,
    /// Monte Carlo paths (>= 2)
    #[arg(long)]
    pub n: Option<usize>,
    /// Euler step dt > 0 [default: 1e-3]
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct MomentsArgs {
    /// Dimension delta in [0, 1)
    #[arg(long)]
    pub delta: Option<f64>,
    /// Start x > 0
    #[arg(long)]
    pub x: Option<f64>,
    /// Horizon T > 0
    #[arg(long)]
    pub t: Option<f64>,
    /// Monte Carlo paths (>= 2)
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated moment orders p > 0
    #[arg(long, value_delimiter = ',')]
    pub p_list: Option<Vec<f64>>,
    /// Euler step dt > 0 [default: 1e-3]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Fraction of the sample in the Hill estimator, in (0, 1) [default: 0.01]
    #[arg(long)]
    pub tail_fraction: Option<f64>,
    /// Bootstrap resamples (>= 1) [default: 200]
    #[arg(long)]
    pub resamples: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct FlowArgs {
    /// Dimension delta >= 0
    #[arg(long)]
    pub delta: Option<f64>,
    /// Lower start x > 0
    #[arg(long)]
    pub x: Option<f64>,
    /// Upper start y > x
    #[arg(long)]
    pub y: Option<f64>,
    /// Horizon T > 0
    #[arg(long)]
    pub t: Option<f64>,
    /// Time of the finite-difference comparison, in (0, T]
    #[arg(long)]
    pub t_eval: Option<f64>,
    /// Number of coupled pairs (>= 1)
    #[arg(long)]
    pub seeds: Option<u64>,
    /// Euler step dt > 0 [default: 1e-3]
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ScalingArgs {
    /// Dimension delta in [0, 2)
    #[arg(long)]
    pub delta: Option<f64>,
    /// Start y > 0 compared with 1
    #[arg(long)]
    pub y: Option<f64>,
    /// Samples per start (>= 2)
    #[arg(long)]
    pub n: Option<usize>,
    /// Euler step dt > 0 [default: 2.5e-4]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Censoring horizon in units of start^2, > 0 [default: 50]
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Comma-separated times s > 0 for the delta = 0 absorption law
    #[arg(long, value_delimiter = ',')]
    pub s_grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct BaselineArgs {
    /// Mean reversion theta > 0
    #[arg(long)]
    pub theta: Option<f64>,
    /// Start x (any real)
    #[arg(long, allow_negative_numbers = true)]
    pub x: Option<f64>,
    /// Horizon T > 0
    #[arg(long)]
    pub t: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub f: FArgs,
    /// Monte Carlo paths (>= 2)
    #[arg(long)]
    pub n: Option<usize>,
    /// Euler step dt > 0 [default: 1e-3]
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SuiteArgs {
    /// Comma-separated criteria in 1..=15 [default: all]
    #[arg(long, value_delimiter = ',')]
    pub criteria: Option<Vec<usize>>,
    /// Multiplier > 0 on every path count [default: 1]
    #[arg(long)]
    pub scale: Option<f64>,
}

/// Parsed config file, or an empty object.
pub fn load_file(path: Option<&PathBuf>) -> Result<Map<String, Value>, String> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(format!("{}: config must be a JSON object", path.display())),
        Err(e) => Err(format!("{}: {e}", path.display())),
    }
}

/// Overlay the flags given on the command line onto the file values.
pub fn merge<T: Serialize + DeserializeOwned>(file: &Map<String, Value>, cli: &T) -> Result<T, String> {
    let mut merged = file.clone();
    if let Value::Object(given) = serde_json::to_value(cli).map_err(|e| e.to_string())? {
        for (k, v) in given {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| format!("config: {e}"))
}

/// Value of a required parameter.
pub fn req<T: Copy>(v: Option<T>, name: &str) -> Result<T, String> {
    v.ok_or_else(|| format!("missing required parameter --{name}"))
}
