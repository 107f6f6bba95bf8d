use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairfront::certify::DisplacementChoice;
use fairfront::{CompositionMode, DisparityMethod, Variant};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "fairfront",
    version,
    about = "Statistical-parity post-processing with Wasserstein barycenters",
    after_help = "A flat key=value file passed with --config supplies defaults; flags on the command line win."
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Input CSV
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,

    /// Output file (directory for `experiment`); stdout when omitted
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    #[arg(long, global = true, default_value = "group")]
    pub group_col: String,

    /// Comma-separated outcome columns
    #[arg(long, global = true, value_delimiter = ',', default_value = "y")]
    pub outcome_cols: Vec<String>,

    /// Barycenter estimator; quantile for one outcome, affine otherwise
    #[arg(long, global = true)]
    pub variant: Option<Variant>,

    /// Tolerance grid `min:max:count`; `max` may be `auto` for sqrt(2) V
    #[arg(long, global = true)]
    pub d_grid: Option<DGrid>,

    #[arg(long, global = true)]
    pub epsilon: Option<f64>,

    #[arg(long, global = true)]
    pub delta: Option<f64>,

    /// Lipschitz constant of the trained model
    #[arg(long, global = true)]
    pub lipschitz_k: Option<f64>,

    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Bound on outcome norms for the affine displacement bound
    #[arg(long, global = true)]
    pub y_sup: Option<f64>,

    /// Which displacement estimate feeds certificates
    #[arg(long, global = true, value_enum, default_value_t = LChoice::Empirical)]
    pub displacement: LChoice,

    /// Flat key=value defaults file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit barycenter maps and write the model JSON
    Fit,
    /// Sweep the Pareto frontier and write CSV (and optionally SVG)
    Frontier(FrontierArgs),
    /// Issue an individual-fairness certificate
    Certify(CertifyArgs),
    /// Apply the Pareto-optimal transform at one tolerance
    Transform(TransformArgs),
    /// Pairwise W2 distances and the Wasserstein disparity
    Disparity(DisparityArgs),
    /// Generate seeded synthetic data
    Synth(SynthArgs),
    /// OLS baselines, barycenter, frontier and certificates in one report
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct FrontierArgs {
    /// Fitted model; refit from --input when omitted
    #[arg(long)]
    pub model: Option<PathBuf>,

    /// Also write an SVG plot here
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long)]
    pub model: PathBuf,

    #[arg(long, value_enum, default_value_t = TheoremArg::Auto)]
    pub theorem: TheoremArg,

    /// delta of an (epsilon, delta_g)-IF trained model
    #[arg(long)]
    pub delta_g: Option<f64>,

    /// epsilon of an (epsilon_g, delta)-IF trained model
    #[arg(long)]
    pub epsilon_g: Option<f64>,

    #[arg(long, value_enum, default_value_t = ModeArg::Post)]
    pub mode: ModeArg,

    /// Use this displacement instead of measuring it on --input
    #[arg(long)]
    pub displacement_l: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,

    /// Disparity tolerance d
    #[arg(long, visible_alias = "d")]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct DisparityArgs {
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// `label:mean:cov:n` Gaussian group (repeatable); with --linear, `label:shift:n`.
    /// Means are comma lists, covariance rows are `;`-separated (a scalar means s·I)
    #[arg(long = "group", required = true)]
    pub groups: Vec<String>,

    /// Linear regression data: features x ~ N(shift·1, I), y = mean(x) + shift
    #[arg(long)]
    pub linear: bool,

    #[arg(long, default_value_t = 2)]
    pub n_features: usize,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Comma-separated feature columns
    #[arg(long, value_delimiter = ',', required = true)]
    pub feature_cols: Vec<String>,

    /// `epsilon:delta` budget (repeatable); --epsilon/--delta add one more
    #[arg(long = "budget")]
    pub budgets: Vec<Budget>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LChoice {
    Empirical,
    Bound,
}

impl From<LChoice> for DisplacementChoice {
    fn from(c: LChoice) -> Self {
        match c {
            LChoice::Empirical => DisplacementChoice::Empirical,
            LChoice::Bound => DisplacementChoice::Bound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TheoremArg {
    Auto,
    All,
    LipschitzIncompatibility,
    BarycenterEpsilonDelta,
    FrontierEpsilonDelta,
    CompositionEpsilonDelta,
    CompositionLipschitz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Post,
    Pre,
}

impl From<ModeArg> for CompositionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Post => CompositionMode::Post,
            ModeArg::Pre => CompositionMode::Pre,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Quantile1d,
    Bures,
    ExactAssignment,
}

impl From<MethodArg> for DisparityMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Quantile1d => DisparityMethod::Quantile1d,
            MethodArg::Bures => DisparityMethod::Bures,
            MethodArg::ExactAssignment => DisparityMethod::ExactAssignment,
        }
    }
}

/// Upper end of a tolerance grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridMax {
    Value(f64),
    /// `sqrt(2) V` of the fitted model.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DGrid {
    pub min: f64,
    pub max: GridMax,
    pub count: usize,
}

impl DGrid {
    pub const DEFAULT: DGrid = DGrid {
        min: 0.0,
        max: GridMax::Auto,
        count: 21,
    };

    /// Evenly spaced tolerances; `scale` resolves `auto`.
    pub fn points(&self, scale: f64) -> Result<Vec<f64>, CliError> {
        let max = match self.max {
            GridMax::Value(v) => v,
            GridMax::Auto => scale,
        };
        if max < self.min {
            return Err(CliError::usage(format!(
                "d-grid must be ascending: min {} > max {max}",
                self.min
            )));
        }
        if self.count == 1 {
            return Ok(vec![self.min]);
        }
        let step = (max - self.min) / (self.count - 1) as f64;
        let mut pts: Vec<f64> = (0..self.count).map(|i| self.min + step * i as f64).collect();
        pts[self.count - 1] = max;
        Ok(pts)
    }
}

impl FromStr for DGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [min, max, count] = parts[..] else {
            return Err(format!("expected min:max:count, got `{s}`"));
        };
        let min: f64 = min.trim().parse().map_err(|_| format!("bad grid minimum `{min}`"))?;
        let max = match max.trim() {
            "auto" => GridMax::Auto,
            m => GridMax::Value(m.parse().map_err(|_| format!("bad grid maximum `{m}`"))?),
        };
        let count: usize = count.trim().parse().map_err(|_| format!("bad grid count `{count}`"))?;
        if count == 0 {
            return Err("d-grid count must be at least 1 (empty grid)".into());
        }
        if !(min >= 0.0) || !min.is_finite() {
            return Err(format!("d-grid minimum must be finite and >= 0, got {min}"));
        }
        if let GridMax::Value(m) = max {
            if !m.is_finite() || m < min {
                return Err(format!("d-grid must be ascending with finite ends, got {min}:{m}"));
            }
        }
        Ok(DGrid { min, max, count })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub epsilon: f64,
    pub delta: f64,
}

impl FromStr for Budget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (e, d) = s.split_once(':').ok_or_else(|| format!("expected epsilon:delta, got `{s}`"))?;
        let epsilon: f64 = e.trim().parse().map_err(|_| format!("bad epsilon `{e}`"))?;
        let delta: f64 = d.trim().parse().map_err(|_| format!("bad delta `{d}`"))?;
        if !(epsilon >= 0.0 && delta >= 0.0) || !epsilon.is_finite() || !delta.is_finite() {
            return Err(format!("budget values must be finite and >= 0, got `{s}`"));
        }
        Ok(Budget { epsilon, delta })
    }
}
