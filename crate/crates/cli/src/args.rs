use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "paramred",
    version,
    about = "Active subspaces, kernel active subspaces and nonlinear level-set learning"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Linear active subspace of the gradient covariance.
    As(AsArgs),
    /// Active subspace in a random Fourier feature space.
    Kas(KasArgs),
    /// Nonlinear level-set learning with a coupling network.
    Nll(NllArgs),
    /// Estimate or rescale gradients and write them out.
    Gradients(GradientsArgs),
    /// Response surface on reduced coordinates, scored by cross-validation.
    Surface(SurfaceArgs),
    /// Compare methods on a built-in test function.
    Bench(BenchArgs),
}

/// Active dimension: a number or `auto` (largest spectral gap).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KSpec {
    Auto,
    Fixed(usize),
}

impl FromStr for KSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(KSpec::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(KSpec::Fixed(k)),
            _ => Err(format!("expected `auto` or a positive integer, got `{s}`")),
        }
    }
}

impl std::fmt::Display for KSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KSpec::Auto => write!(f, "auto"),
            KSpec::Fixed(k) => write!(f, "{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GradientChoice {
    /// Exact columns when the file has them, local linear otherwise.
    Auto,
    Exact,
    LocalLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Distribution {
    Gaussian,
    Laplace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReducerChoice {
    As,
    Kas,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SurfaceChoice {
    Poly,
    Kernel,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Sample CSV with header x1..xd[,f][,g1..gd].
    #[arg(long)]
    pub input: PathBuf,
    /// Input bounds as lo:hi pairs, one per dimension.
    #[arg(long, conflicts_with = "bounds_file")]
    pub bounds: Option<String>,
    /// CSV with header lower,upper and one row per dimension.
    #[arg(long)]
    pub bounds_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = GradientChoice::Auto)]
    pub gradients: GradientChoice,
    /// Neighbors per local linear fit [default: 2(d+1)].
    #[arg(long)]
    pub n_neighbors: Option<usize>,
    /// Maximum number of local linear regression centers.
    #[arg(long, default_value_t = 100)]
    pub max_centers: usize,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long)]
    pub output_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Leave the timestamp out of result.json.
    #[arg(long)]
    pub no_timestamp: bool,
}

#[derive(Debug, Args)]
pub struct AsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    #[arg(long, default_value = "auto")]
    pub k: KSpec,
    /// Bootstrap replicates; 0 disables the bootstrap.
    #[arg(long, default_value_t = 100)]
    pub n_boot: usize,
    /// Fit a polynomial surface of this degree and report its CV NRMSE.
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
}

#[derive(Debug, Args)]
pub struct KasArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Feature dimension D.
    #[arg(long, default_value_t = 1024)]
    pub features: usize,
    /// Fixed spectral scale; skips tuning.
    #[arg(long, conflicts_with = "sigma_grid")]
    pub sigma: Option<f64>,
    /// Candidate spectral scales for cross-validated tuning.
    #[arg(long, value_delimiter = ',')]
    pub sigma_grid: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Distribution::Gaussian)]
    pub distribution: Distribution,
    /// Degree of the polynomial surface used for tuning and scoring.
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
}

#[derive(Debug, Args)]
pub struct NllArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8)]
    pub blocks: usize,
    #[arg(long, default_value_t = 0.25)]
    pub step: f64,
    /// Hidden width as a multiple of the read-half size.
    #[arg(long, default_value_t = 1)]
    pub width: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// Mini-batch size [default: full batch].
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Fit a polynomial surface of this degree and report its CV NRMSE.
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
}

#[derive(Debug, Args)]
pub struct GradientsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    #[arg(long, value_enum, default_value_t = ReducerChoice::As)]
    pub reducer: ReducerChoice,
    #[arg(long, default_value = "auto")]
    pub k: KSpec,
    #[arg(long, value_enum, default_value_t = SurfaceChoice::Poly)]
    pub kind: SurfaceChoice,
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lengthscale: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub ridge: f64,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 1024)]
    pub features: usize,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value_t = Distribution::Gaussian)]
    pub distribution: Distribution,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Test function name (RIDGE1, RIDGE2, RADIAL, AFFINE, QUAD).
    #[arg(long)]
    pub function: String,
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    #[command(flatten)]
    pub out: OutputArgs,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 1024)]
    pub features: usize,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.25, 0.5, 1.0, 2.0, 4.0])]
    pub sigma_grid: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Distribution::Gaussian)]
    pub distribution: Distribution,
    /// Include nonlinear level-set learning.
    #[arg(long)]
    pub nll: bool,
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8)]
    pub blocks: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub learning_rate: f64,
}
