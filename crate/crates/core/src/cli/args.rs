use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::sim::study::{SAMPLE_SIZES, SAMPLE_SIZE_LEVELS, SIM1_LEVELS, SIM2_LEVELS};

#[derive(Parser, Debug)]
#[command(name = "kere", version, about = "Kernel expectile regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Fit one model at a fixed λ and write it as JSON.
    Fit(FitArgs),
    /// Warm-started fits over a λ grid; one CSV row per λ.
    Path(PathArgs),
    /// K-fold cross-validation over the (σ², λ) grid.
    Cv(CvArgs),
    /// Predict with a saved model.
    Predict(PredictArgs),
    /// Generate a simulated dataset.
    Simulate {
        #[command(subcommand)]
        design: SimulateCommand,
    },
    /// Replicated simulation studies with MAD and timing tables.
    Bench {
        #[command(subcommand)]
        study: BenchCommand,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Rbf,
    Poly,
    Sigmoid,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Toggle {
    On,
    Off,
}

#[derive(Args, Debug, Serialize)]
pub struct DataArgs {
    /// CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Response column, by name or 0-based index (default: last column).
    #[arg(long)]
    pub response: Option<String>,
    /// Standardize features before building the kernel.
    #[arg(long, value_enum, default_value = "on")]
    pub standardize: Toggle,
}

#[derive(Args, Debug, Serialize)]
pub struct KernelArgs {
    #[arg(long, value_enum, default_value = "rbf")]
    pub kernel: KernelFamily,
    /// RBF bandwidth (default: median pairwise squared distance).
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Polynomial / sigmoid offset.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Sigmoid slope.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Polynomial degree.
    #[arg(long)]
    pub degree: Option<u32>,
}

#[derive(Args, Debug, Serialize)]
pub struct SolverArgs {
    /// Stopping tolerance (default 1e-8 (1 + max|y|)).
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct GridArgs {
    /// Largest λ (default: doubling probe until every |α_i| ≤ 1e-4).
    #[arg(long)]
    pub lambda_max: Option<f64>,
    /// Smallest λ (default: 1e-4 · λ_max).
    #[arg(long)]
    pub lambda_min: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub nlambda: usize,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 0.5)]
    pub omega: f64,
    #[arg(long)]
    pub lambda: f64,
    /// Also compute the worst-case contraction rate (O(n³)).
    #[arg(long)]
    pub rate_bound: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct PathArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 0.5)]
    pub omega: f64,
    #[arg(long)]
    pub rate_bound: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 0.5)]
    pub omega: f64,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Comma-separated σ² values (default: {0.25, 0.5, 1, 2, 4} × median).
    #[arg(long, value_delimiter = ',')]
    pub sigma2_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Grid CSV; the best pair goes to `<out>.best.json` unless `--best-out` is set.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub best_out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Feature CSV; columns are matched to the model's feature names when present.
    #[arg(long)]
    pub data: PathBuf,
    /// Must equal the model's level when given.
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sim1Noise {
    Mixed,
    Laplace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sim2Noise {
    Normal,
    T4,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sim2Model {
    Homo,
    Hetero,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimulateCommand {
    /// One covariate, heteroscedastic: y = sin(0.7x) + x²/20 + ((|x|+1)/5) ε.
    Sim1(SimulateSim1Args),
    /// y = f₁(x) + |f₂(x)| ε with random functions f₁, f₂.
    Sim2(SimulateSim2Args),
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct SimulateSim1Args {
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "mixed")]
    pub error: Sim1Noise,
    /// Levels whose true expectile is added as `truth_<ω>` columns.
    #[arg(long, value_delimiter = ',')]
    pub omega: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct SimulateSim2Args {
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub p: usize,
    #[arg(long, value_enum, default_value = "normal")]
    pub error: Sim2Noise,
    #[arg(long, value_enum, default_value = "homo")]
    pub model: Sim2Model,
    /// Seed of the random functions (default: --seed).
    #[arg(long)]
    pub function_seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub omega: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct TuningArgs {
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Multipliers of the median pairwise squared distance.
    #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5, 1.0, 2.0, 4.0])]
    pub sigma2_multipliers: Vec<f64>,
    #[arg(long, default_value_t = 15)]
    pub nlambda: usize,
    /// λ_min / λ_max of every CV grid.
    #[arg(long, default_value_t = 1e-7)]
    pub lambda_ratio: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// Master seed; replication r uses seed + stride · r.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub seed_stride: u64,
    /// MAD table (CSV).
    #[arg(long)]
    pub out: PathBuf,
    /// Timing table (CSV). Wall-clock, so not reproducible.
    #[arg(long)]
    pub timing_out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchCommand {
    /// Simulation I MAD table (rows: noise, columns: levels).
    Sim1(BenchSim1Args),
    /// Simulation II MAD and timing tables (rows: levels, columns: model × noise).
    Sim2(BenchSim2Args),
    /// MAD and timing against training size, heteroscedastic mixed noise.
    SampleSize(BenchSampleSizeArgs),
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct BenchSim1Args {
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[arg(long, alias = "omega", value_delimiter = ',', default_values_t = SIM1_LEVELS)]
    pub omegas: Vec<f64>,
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    #[arg(long, default_value_t = 2000)]
    pub n_test: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Sim1Noise::Mixed, Sim1Noise::Laplace])]
    pub errors: Vec<Sim1Noise>,
    /// Tidy (x, level, predicted, true) curves from the first replication's seed.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    #[arg(long, default_value_t = 201)]
    pub curve_points: usize,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct BenchSim2Args {
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[arg(long, alias = "omega", value_delimiter = ',', default_values_t = SIM2_LEVELS)]
    pub omegas: Vec<f64>,
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    #[arg(long, default_value_t = 1200)]
    pub n_test: usize,
    #[arg(long, default_value_t = 10)]
    pub p: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Sim2Model::Homo, Sim2Model::Hetero])]
    pub models: Vec<Sim2Model>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Sim2Noise::Normal, Sim2Noise::T4, Sim2Noise::Mixed])]
    pub errors: Vec<Sim2Noise>,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct BenchSampleSizeArgs {
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[arg(long, alias = "omega", value_delimiter = ',', default_values_t = SAMPLE_SIZE_LEVELS)]
    pub omegas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = SAMPLE_SIZES)]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 2000)]
    pub n_test: usize,
    #[arg(long, default_value_t = 10)]
    pub p: usize,
}
