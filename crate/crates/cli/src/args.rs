use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "statmanifold", version, about = "Information geometry of parametric families")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check normalization, score mean and support invariance.
    Validate(ValidateArgs),
    /// Fisher information matrix at a point.
    Fisher(FisherArgs),
    /// α-connection coefficients and the skewness tensor.
    Connection(ConnectionArgs),
    /// Riemann tensor, sectional curvature and flatness verdicts.
    Curvature(CurvatureArgs),
    /// Integrates an α-geodesic.
    Geodesic(GeodesicArgs),
    /// Monte Carlo estimator covariance against the Cramér-Rao bound.
    CramerRao(CramerRaoArgs),
    /// Second-order MSE expansion for a curved model.
    MseExpansion(MseArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Fisher(_) => "fisher",
            Command::Connection(_) => "connection",
            Command::Curvature(_) => "curvature",
            Command::Geodesic(_) => "geodesic",
            Command::CramerRao(_) => "cramer-rao",
            Command::MseExpansion(_) => "mse-expansion",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Validate(a) => &a.common,
            Command::Fisher(a) => &a.common,
            Command::Connection(a) => &a.common,
            Command::Curvature(a) => &a.common,
            Command::Geodesic(a) => &a.common,
            Command::CramerRao(a) => &a.common,
            Command::MseExpansion(a) => &a.common,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

/// Knobs shared by every subcommand.
#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Relative quadrature tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Draws for Monte Carlo expectations.
    #[arg(long, default_value_t = 1_000_000)]
    pub mc_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValidateArgs {
    #[arg(long)]
    pub family: PathBuf,
    /// Parameter point; defaults to an interior point of the domain.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub at: Option<Vec<f64>>,
    /// Reference point for the support-invariance check.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub reference: Option<Vec<f64>>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FormArg {
    Score,
    Hessian,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FisherArgs {
    #[arg(long)]
    pub family: PathBuf,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub at: Vec<f64>,
    #[arg(long, value_enum, default_value_t = FormArg::Score)]
    pub form: FormArg,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConnectionArgs {
    #[arg(long)]
    pub family: PathBuf,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub at: Vec<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub alpha: f64,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CurvatureArgs {
    #[arg(long)]
    pub family: PathBuf,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub at: Vec<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub alpha: f64,
    /// Relative finite-difference step for derivatives of Γ.
    #[arg(long, default_value_t = statmanifold::curvature::DEFAULT_H)]
    pub h: f64,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GeodesicArgs {
    #[arg(long)]
    pub family: PathBuf,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub from: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub velocity: Vec<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    /// RK4 step; defaults to t_end / 1000.
    #[arg(long)]
    pub dt: Option<f64>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorArg {
    Mean,
    Median,
    Mle,
    /// Expression over mean, median, var, sd, min, max, sum, n (see --expr).
    Expr,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CramerRaoArgs {
    #[arg(long)]
    pub family: PathBuf,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Mean)]
    pub estimator: EstimatorArg,
    /// Estimator expression when --estimator expr.
    #[arg(long)]
    pub expr: Option<String>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub at: Vec<f64>,
    /// Samples per trial.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MseArgs {
    /// Curved-model JSON document.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub at: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
    pub n_list: Vec<usize>,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Mle)]
    pub estimator: EstimatorArg,
    #[arg(long)]
    pub expr: Option<String>,
    /// Initial trials per sample size.
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    /// Cap for the doubling policy; defaults to four times --trials.
    #[arg(long)]
    pub max_trials: Option<usize>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
}
