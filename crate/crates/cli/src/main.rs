use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ptspec::linalg::C64;
use ptspec::transversal::V0Spec;
use ptspec::waveguide2d::{CouplingSpec, PotentialSpec, XBoundary};
use serde::{Deserialize, Serialize};

mod commands;
mod output;

const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;

#[derive(Parser, Debug)]
#[command(name = "ptspec", version, about = "Definite-type spectral analysis of PT-symmetric Robin waveguides")]
struct Cli {
    /// JSON run configuration; its values override the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, global = true, default_value_t = 20_240_601)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form transversal eigenvalues, Krein indicators and types
    #[command(allow_negative_numbers = true)]
    Transversal(TransversalArgs),
    /// Definite-type decomposition of the unperturbed waveguide spectrum
    #[command(allow_negative_numbers = true)]
    Msets(MsetsArgs),
    /// Roots of the secular equation in a rectangle of the k-plane
    #[command(allow_negative_numbers = true)]
    Secular(SecularArgs),
    /// Continue secular roots along a range of beta0
    #[command(allow_negative_numbers = true)]
    Branches(BranchesArgs),
    /// Randomized Kronecker-sum prediction-vs-oracle campaign
    #[command(allow_negative_numbers = true)]
    TensorCheck(TensorCheckArgs),
    /// Eigenvalues of the discretized 2D waveguide near a target
    #[command(allow_negative_numbers = true)]
    Spectrum2d(Spectrum2dArgs),
    /// Smallest-singular-value map and imaginary-part bound fit
    #[command(allow_negative_numbers = true)]
    Pseudospectrum(PseudospectrumArgs),
    /// Plot-ready CSV data for the figures
    #[command(allow_negative_numbers = true)]
    Figures(FiguresArgs),
}

/// Default numerical tolerances, overridable under `tolerances` in a config.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Gram-matrix eigenvalues within this of zero count as indefinite.
    pub gram: f64,
    /// Accepted relative eigenpair residual.
    pub residual: f64,
    /// Root and set-endpoint accuracy.
    pub endpoint: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { gram: 1e-8, residual: 1e-8, endpoint: 1e-12 }
    }
}

pub fn parse_complex(s: &str) -> Result<C64, String> {
    let (re, im) = s.split_once(',').ok_or_else(|| format!("expected re,im but got {s:?}"))?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok(C64::new(p(re)?, p(im)?))
}

pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    parse_complex(s).map(|z| (z.re, z.im))
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct TransversalArgs {
    #[arg(long = "a", default_value_t = HALF_PI)]
    pub a: f64,
    #[arg(long, default_value_t = 0.5)]
    pub alpha0: f64,
    /// Number of modes listed.
    #[arg(long, default_value_t = 10)]
    pub modes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum V0Kind {
    Zero,
    Constant,
    SquareWell,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct MsetsArgs {
    #[arg(long = "a", default_value_t = HALF_PI)]
    pub a: f64,
    #[arg(long, default_value_t = 0.5)]
    pub alpha0: f64,
    #[arg(long, value_enum, default_value_t = V0Kind::Zero)]
    pub v0: V0Kind,
    #[arg(long, default_value_t = 0.0)]
    pub v0_constant: f64,
    #[arg(long, default_value_t = 1.0)]
    pub well_depth: f64,
    #[arg(long, default_value_t = 1.0)]
    pub well_width: f64,
    #[arg(long)]
    pub window_max: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub max_modes: usize,
    /// Full longitudinal specification (config only); replaces `v0`.
    #[arg(skip)]
    pub v0_spec: Option<V0Spec>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SecularArgs {
    #[arg(long = "a", default_value_t = HALF_PI)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha0: f64,
    #[arg(long, default_value_t = -0.05, allow_hyphen_values = true)]
    pub beta0: f64,
    /// Real range of the k-rectangle as `lo,hi`.
    #[arg(long, value_parser = parse_pair, default_value = "0.7,1.3", allow_hyphen_values = true)]
    pub re: (f64, f64),
    #[arg(long, value_parser = parse_pair, default_value = "-0.4,0.4", allow_hyphen_values = true)]
    pub im: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct BranchesArgs {
    #[arg(long = "a", default_value_t = HALF_PI)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha0: f64,
    #[arg(long, default_value_t = -0.1, allow_hyphen_values = true)]
    pub beta0_min: f64,
    #[arg(long, default_value_t = -0.001, allow_hyphen_values = true)]
    pub beta0_max: f64,
    #[arg(long, default_value_t = 40)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = Spacing::Linear)]
    pub spacing: Spacing,
    /// Roots at `beta0_min` to follow, as `re,im`; found automatically when absent.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub start: Vec<C64>,
    /// k-rectangle searched for starting roots.
    #[arg(long, value_parser = parse_pair, default_value = "0.5,2.5", allow_hyphen_values = true)]
    pub search_re: (f64, f64),
    #[arg(long, value_parser = parse_pair, default_value = "-0.5,0.5", allow_hyphen_values = true)]
    pub search_im: (f64, f64),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct TensorCheckArgs {
    #[arg(long, default_value_t = 200)]
    pub instances: usize,
    #[arg(long, default_value_t = 144)]
    pub max_product_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XBoundaryArg {
    Dirichlet,
    Periodic,
}

impl From<XBoundaryArg> for XBoundary {
    fn from(x: XBoundaryArg) -> Self {
        match x {
            XBoundaryArg::Dirichlet => XBoundary::Dirichlet,
            XBoundaryArg::Periodic => XBoundary::Periodic,
        }
    }
}

/// Grid, coupling and potential of the 2D operator.
#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct OperatorArgs {
    #[arg(long = "a", default_value_t = HALF_PI)]
    pub a: f64,
    #[arg(long, default_value_t = 12.0)]
    pub lx: f64,
    #[arg(long, default_value_t = 95)]
    pub nx: usize,
    #[arg(long, default_value_t = 12)]
    pub ny: usize,
    #[arg(long, value_enum, default_value_t = XBoundaryArg::Dirichlet)]
    pub x_boundary: XBoundaryArg,
    #[arg(long, default_value_t = 0.5)]
    pub alpha0: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub beta0: f64,
    /// Height of a Gaussian bump added to alpha0(x); zero disables it.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub bump_height: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub bump_center: f64,
    #[arg(long, default_value_t = 2.0)]
    pub bump_width: f64,
    /// Full coupling profile (config only); replaces the flags above.
    #[arg(skip)]
    pub coupling: Option<CouplingSpec>,
    /// Potential (config only); zero by default.
    #[arg(skip)]
    pub potential: Option<PotentialSpec>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct Spectrum2dArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub op: OperatorArgs,
    #[arg(long, value_parser = parse_complex, default_value = "0.55,0", allow_hyphen_values = true)]
    pub target: C64,
    #[arg(long, default_value_t = 12)]
    pub count: usize,
    /// Return every eigenvalue within this distance of the target instead of a fixed count.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Real window of the realness report as `lo,hi`.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub window: Option<(f64, f64)>,
    #[arg(long, default_value_t = 1e-7)]
    pub realness_tol: f64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct PseudospectrumArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub op: OperatorArgs,
    #[arg(long, value_parser = parse_pair, default_value = "0.35,0.9", allow_hyphen_values = true)]
    pub re: (f64, f64),
    #[arg(long, value_parser = parse_pair, default_value = "0.03,0.4", allow_hyphen_values = true)]
    pub im: (f64, f64),
    #[arg(long, default_value_t = 8)]
    pub mx: usize,
    #[arg(long, default_value_t = 8)]
    pub my: usize,
    #[arg(long, default_value_t = 200)]
    pub dense_limit: usize,
    #[arg(long, default_value_t = 80)]
    pub lanczos_steps: usize,
    /// Fit window in Re λ; defaults to the real range of the map.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub fit_window: Option<(f64, f64)>,
    /// Band of |Im λ| used by the fit; defaults to the imaginary range of the map.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub fit_band: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct FiguresArgs {
    #[arg(long, value_enum)]
    pub which: Figure,
    #[arg(long = "a", default_value_t = HALF_PI)]
    pub a: f64,
    /// fig1: range of alpha0 as `lo,hi`.
    #[arg(long, value_parser = parse_pair, default_value = "0,3.5")]
    pub alpha0_range: (f64, f64),
    #[arg(long, default_value_t = 351)]
    pub alpha0_points: usize,
    #[arg(long, default_value_t = 6)]
    pub modes: usize,
    /// fig2: values of alpha0, one panel each.
    #[arg(long, value_delimiter = ',', default_value = "1,1.7320508075688772")]
    pub alpha0_values: Vec<f64>,
    #[arg(long, default_value_t = 12.0)]
    pub window_max: f64,
    /// fig3: coupling alpha0 and the beta0 range.
    #[arg(long, default_value_t = 1.0)]
    pub alpha0: f64,
    #[arg(long, default_value_t = -0.1, allow_hyphen_values = true)]
    pub beta0_min: f64,
    #[arg(long, default_value_t = -0.001, allow_hyphen_values = true)]
    pub beta0_max: f64,
    #[arg(long, default_value_t = 40)]
    pub samples: usize,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Numerical(String),
    Io(String),
}

impl From<ptspec::Error> for Failure {
    fn from(e: ptspec::Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Io(m)) => {
            eprintln!("i/o error: {m}");
            ExitCode::from(1)
        }
    }
}
