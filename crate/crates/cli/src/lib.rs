//! Command-line front end for stretchy regression.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stretchy_core::linalg::DEFAULT_RCOND;
use stretchy_core::rng::DEFAULT_SEED;
use stretchy_core::transform::NOMINAL_SLOPE;
use stretchy_core::{BasisSpec, Regularization, StretchConfig, SynthKind, Task};

pub mod bench;
pub mod commands;

/// Default noise level for synthetic poly1d targets.
pub const DEFAULT_NOISE_SIGMA: f64 = 0.05;

/// `--c` values at or above this are treated as `c = infinity`.
pub const EXACT_C_THRESHOLD: f64 = 1e50;

#[derive(Debug, Parser)]
#[command(name = "stretchy", version, about = "Stretchy regression toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset as CSV.
    Synth(SynthArgs),
    /// Fit a model and write it as a JSON document.
    Fit(FitArgs),
    /// Predict (or classify) with a saved model.
    Predict(PredictArgs),
    /// Run a cross-validation benchmark described by a TOML manifest.
    Bench(BenchArgs),
    /// Conditioning sweeps and bias/covariance reports.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// poly1d or twoclass2d
    pub kind: SynthKind,
    /// Sample count (default 5 for poly1d, 20 for twoclass2d).
    #[arg(long)]
    pub n: Option<usize>,
    /// Noise standard deviation for poly1d targets (twoclass2d ignores it).
    #[arg(long, default_value_t = DEFAULT_NOISE_SIGMA)]
    pub sigma: f64,
    #[arg(long, env = "SR_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Stretch exponent and regularization.
#[derive(Debug, Clone, Args)]
pub struct StretchArgs {
    #[arg(long)]
    pub k: f64,
    /// Regularization strength; `exact` or any value >= 1e50 selects exact mode.
    #[arg(long, value_parser = parse_c, conflicts_with = "exact")]
    pub c: Option<CValue>,
    /// Exact interpolation (the c -> infinity limit).
    #[arg(long)]
    pub exact: bool,
    /// Pivot-ratio threshold below which a system counts as singular.
    #[arg(long, default_value_t = DEFAULT_RCOND)]
    pub rcond: f64,
}

impl StretchArgs {
    pub fn config(&self) -> anyhow::Result<StretchConfig> {
        let reg = match (self.exact, self.c) {
            (true, _) | (false, Some(CValue::Exact)) => Regularization::Exact,
            (false, Some(CValue::Finite(c))) => Regularization::Regularized { c },
            (false, None) => anyhow::bail!("one of --c or --exact is required"),
        };
        Ok(StretchConfig::new(self.k, reg)?.with_rcond(self.rcond)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CValue {
    Finite(f64),
    Exact,
}

impl CValue {
    pub fn regularization(self) -> Regularization {
        match self {
            CValue::Exact => Regularization::Exact,
            CValue::Finite(c) => Regularization::Regularized { c },
        }
    }
}

pub fn parse_c(s: &str) -> Result<CValue, String> {
    if s.eq_ignore_ascii_case("exact") || s.eq_ignore_ascii_case("inf") {
        return Ok(CValue::Exact);
    }
    let c: f64 = s
        .parse()
        .map_err(|_| format!("invalid value {s:?} for c"))?;
    c_from_number(c)
}

pub fn c_from_number(c: f64) -> Result<CValue, String> {
    if c >= EXACT_C_THRESHOLD {
        Ok(CValue::Exact)
    } else if c > 0.0 && c.is_finite() {
        Ok(CValue::Finite(c))
    } else {
        Err(format!("c must be positive, got {c}"))
    }
}

/// How a regularization setting is echoed in reports.
pub fn describe_reg(reg: &Regularization) -> String {
    match reg {
        Regularization::Exact => "exact".into(),
        Regularization::Regularized { c } => c.to_string(),
    }
}

/// Feature transform flags shared by `fit` and the manifest.
#[derive(Debug, Clone, Args)]
pub struct TransformArgs {
    /// Z-score features with training statistics.
    #[arg(long)]
    pub standardize: bool,
    /// Map standardized features through exp(a x + b); implies --standardize.
    #[arg(long)]
    pub quadrant_map: bool,
    #[arg(long, default_value_t = NOMINAL_SLOPE, allow_hyphen_values = true)]
    pub a: f64,
    /// One offset for every feature, or a comma-separated list.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_list)]
    pub b: Option<FloatList>,
}

/// A comma-separated list of finite numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatList(pub Vec<f64>);

pub fn parse_list(s: &str) -> Result<FloatList, String> {
    let values: Result<Vec<f64>, _> = s.split(',').map(|v| v.trim().parse::<f64>()).collect();
    match values {
        Ok(v) if !v.is_empty() && v.iter().all(|x| x.is_finite()) => Ok(FloatList(v)),
        _ => Err(format!(
            "expected a comma-separated list of numbers, got {s:?}"
        )),
    }
}

/// Like [`parse_list`] but every entry must be a valid stretch exponent.
pub fn parse_k_grid(s: &str) -> Result<FloatList, String> {
    let values = parse_list(s)?;
    if let Some(bad) = values.0.iter().find(|&&k| !(k > 1.0)) {
        return Err(format!("every k must exceed 1, got {bad}"));
    }
    Ok(values)
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long, default_value = "y")]
    pub target: String,
    #[arg(long, default_value = "regression")]
    pub task: Task,
    #[command(flatten)]
    pub stretch: StretchArgs,
    #[arg(long, default_value_t = 1.0)]
    pub density: f64,
    /// raw, poly:N or poly2:N, optionally with :nointercept
    #[arg(long, default_value = "raw")]
    pub basis: BasisSpec,
    #[command(flatten)]
    pub transform: TransformArgs,
    #[arg(long)]
    pub model_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Column to drop from the input before predicting.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Emit +/-1 labels instead of raw predictions.
    #[arg(long)]
    pub classify: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub manifest: PathBuf,
    /// Overrides the manifest seed.
    #[arg(long, env = "SR_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Condition number of P (P^T)^(1/(k-1)) over a grid of k.
    Condsweep(CondsweepArgs),
    /// Bias vector and estimator covariance.
    Variance(VarianceArgs),
}

/// Where the design matrix comes from: a CSV table or a seeded draw.
#[derive(Debug, Clone, Args)]
pub struct DesignArgs {
    /// CSV whose columns are the design matrix (header row required).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long, env = "SR_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CondsweepArgs {
    #[command(flatten)]
    pub design: DesignArgs,
    #[arg(long, value_parser = parse_k_grid, default_value = "1.05,1.1,1.25,1.5,1.75,2,3,5,10")]
    pub k_grid: FloatList,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VarianceArgs {
    #[command(flatten)]
    pub design: DesignArgs,
    #[command(flatten)]
    pub stretch: StretchArgs,
    /// True coefficients (default all ones).
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    pub alpha: Option<FloatList>,
    /// Noise standard deviation for the isotropic covariance.
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Parses the process arguments, runs the command and maps the outcome to
/// an exit status.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failed) => {
            eprintln!("{failed} run(s) failed");
            ExitCode::FAILURE
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            if let Some(hint) = remedy(&err) {
                eprintln!("hint: {hint}");
            }
            ExitCode::FAILURE
        }
    }
}

/// Runs one command; returns the number of failed runs.
pub fn run(cli: Cli) -> anyhow::Result<usize> {
    match cli.command {
        Command::Synth(args) => commands::synth(&args).map(|_| 0),
        Command::Fit(args) => commands::fit(&args).map(|_| 0),
        Command::Predict(args) => commands::predict(&args).map(|_| 0),
        Command::Bench(args) => bench::run(&args),
        Command::Analyze(AnalyzeCommand::Condsweep(args)) => commands::condsweep(&args).map(|_| 0),
        Command::Analyze(AnalyzeCommand::Variance(args)) => commands::variance(&args).map(|_| 0),
    }
}

/// A one-line suggestion for errors the user can fix with a flag.
pub fn remedy(err: &anyhow::Error) -> Option<&'static str> {
    use stretchy_core::Error as E;
    match err.downcast_ref::<E>()? {
        E::NegativeBase { .. } => Some("enable --quadrant-map"),
        E::SingularMatrix { .. } => Some("use a finite --c or lower --rcond"),
        E::ZeroVariance { .. } => Some("drop constant columns or omit --standardize"),
        E::MissingTarget(_) => Some("check the --target column name"),
        _ => None,
    }
}
