use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use wwsurv_core::arma::ArimaOrder;
use wwsurv_core::{Measure, Method};

pub const OUT_DIR_ENV: &str = "WWSURV_OUT_DIR";

#[derive(Debug, Parser, Serialize)]
#[command(name = "wwsurv", version, about = "Wastewater-based surveillance of virus excretion")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Flat `key = value` file; each key is a long flag of the subcommand.
    /// Flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Directory receiving all artifacts.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = ".")]
    pub out_dir: PathBuf,

    /// Skip SVG figures; CSV and JSON are always written.
    #[arg(long, global = true)]
    pub no_plot: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate a synthetic panel with a known national curve.
    Simulate(SimulateArgs),
    /// Parse a panel CSV and report invariant violations.
    Validate(InputArgs),
    /// Build the national curve.
    Aggregate(AggregateArgs),
    /// Rank reduced sampling designs or sewer subsets against the reference.
    Scenarios(ScenariosArgs),
    /// Leave-one-plant-out influence on the national curve.
    Influence(InfluenceArgs),
    /// Uncertainty band for the national curve.
    BootstrapCi(BootstrapArgs),
    /// Run a control chart on the national curve.
    Monitor(MonitorArgs),
    /// Fit the negative-binomial INGARCH model to the rounded curve.
    FitCountModel(CountModelArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Validate(_) => "validate",
            Command::Aggregate(_) => "aggregate",
            Command::Scenarios(_) => "scenarios",
            Command::Influence(_) => "influence",
            Command::BootstrapCi(_) => "bootstrap-ci",
            Command::Monitor(_) => "monitor",
            Command::FitCountModel(_) => "fit-count-model",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 48)]
    pub n_plants: usize,
    #[arg(long, default_value = "2023-01-19")]
    pub start: NaiveDate,
    #[arg(long, default_value = "2024-12-31")]
    pub end: NaiveDate,
    /// Excretors per 100,000 residents outside the waves.
    #[arg(long, default_value_t = 100.0)]
    pub baseline: f64,
    /// Comma-separated `peak:height:width_days` bumps, or `none`.
    #[arg(long, default_value = "2023-09-20:800:25,2024-06-15:1200:30")]
    pub waves: String,
    #[arg(long, default_value_t = 0.15)]
    pub noise_sd_log: f64,
    #[arg(long, default_value_t = 0.3)]
    pub plant_spread: f64,
    /// Leave the temperature, COD and nitrogen columns empty.
    #[arg(long)]
    pub no_chemistry: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct InputArgs {
    /// Panel CSV with one row per laboratory sample.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Rename a schema column, `variable=column`; repeatable.
    #[arg(long = "column", value_name = "VAR=COL")]
    pub columns: Vec<String>,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
}

#[derive(Debug, Args, Serialize)]
pub struct PipelineArgs {
    /// 1 = population-weighted ratio of sums, 2 = per-day quantile.
    #[arg(long, default_value = "1")]
    pub method: Method,
    /// Quantile level for method 2.
    #[arg(long, default_value_t = 0.5)]
    pub quantile: f64,
    /// RNA copies shed per infected person and day.
    #[arg(long, default_value_t = 16e9)]
    pub shedding: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct AggregateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Also write the curve divided by its maximum.
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grid {
    Sampling,
    Sewer,
}

#[derive(Debug, Args, Serialize)]
pub struct ScenariosArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long, value_enum, default_value_t = Grid::Sampling)]
    pub grid: Grid,
    /// Measure the ranking is sorted by: l2, corr or crosscorr.
    #[arg(long, default_value = "corr")]
    pub measure: Measure,
    /// Cross-correlation lag horizon; default ⌊10·log10 N⌋.
    #[arg(long)]
    pub max_lag: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct InfluenceArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long, default_value = "l2")]
    pub measure: Measure,
    #[arg(long)]
    pub max_lag: Option<usize>,
    /// Divide each influence by the plant's residents.
    #[arg(long)]
    pub normalize: bool,
    /// Permit method-2 curves.
    #[arg(long)]
    pub allow_method2: bool,
}

/// Where a command reads its national curve from.
#[derive(Debug, Args, Serialize)]
pub struct CurveSource {
    /// Panel CSV; the curve is built with the pipeline options.
    #[arg(long, short, conflicts_with = "curve", required_unless_present = "curve")]
    pub input: Option<PathBuf>,
    /// Curve CSV with `date,value` columns, as written by `aggregate`.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Rename a schema column, `variable=column`; repeatable.
    #[arg(long = "column", value_name = "VAR=COL")]
    pub columns: Vec<String>,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub source: CurveSource,
    #[arg(long, default_value_t = 1000)]
    pub replications: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// ARIMA order `p,d,q` of the bootstrap model.
    #[arg(long, default_value = "1,0,3")]
    pub order: ArimaOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Chart {
    Cusum,
    Shewhart,
    /// Shewhart chart on ARIMA one-step residuals.
    Residual,
    /// Bayesian predictive control chart.
    Pcc,
}

#[derive(Debug, Args, Serialize)]
pub struct MonitorArgs {
    #[command(flatten)]
    pub source: CurveSource,
    #[arg(long, value_enum, default_value_t = Chart::Cusum)]
    pub chart: Chart,
    /// First day of the in-control span; default the curve start.
    #[arg(long)]
    pub phase1_start: Option<NaiveDate>,
    /// Last day of the in-control span; default 27 days after its start.
    #[arg(long)]
    pub phase1_end: Option<NaiveDate>,
    /// In-control mean, overriding the phase-I estimate.
    #[arg(long)]
    pub mu0: Option<f64>,
    /// In-control standard deviation, overriding the phase-I estimate.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub k: f64,
    #[arg(long, default_value_t = 4.5)]
    pub h: f64,
    /// Shewhart limit multiple.
    #[arg(long, default_value_t = 3.0)]
    pub l: f64,
    #[arg(long, default_value = "1,0,3")]
    pub order: ArimaOrder,
    /// PCC false-alarm rate; default matches the CUSUM's in-control ARL.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Restart the CUSUM after each signal.
    #[arg(long)]
    pub reset: bool,
    /// Signal when the statistic reaches the limit instead of exceeding it.
    #[arg(long)]
    pub inclusive: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct CountModelArgs {
    #[command(flatten)]
    pub source: CurveSource,
    /// Lags of past counts.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub obs_lags: Vec<usize>,
    /// Lags of past conditional means.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    pub mean_lags: Vec<usize>,
}
