use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "fbmx", version, about = "Small-time expansions of fBm-driven SDEs")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Global {
    /// Seed for every random stream; required by stochastic commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0: one per core). Never changes results.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Result file; relative paths resolve against $FBMX_OUT_DIR when set.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Exit with status 5 when the command's check fails.
    #[arg(long, global = true)]
    pub assert: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// fBm path sampling.
    #[command(subcommand)]
    Fbm(FbmCommand),
    /// Expected iterated integrals E ∫_{Δ^k[0,1]} dB^I.
    Moments(MomentsArgs),
    /// Word coefficients of the operator Γ_k.
    Gamma(GammaArgs),
    /// Truncated expansion against Monte Carlo E f(X_t).
    Expand(ExpandArgs),
    /// Residuals ∫ Γ_k f dμ for a candidate invariant measure.
    Invariant(InvariantArgs),
    /// Chen identity defect on a random piecewise-linear path.
    SignatureCheck(SignatureArgs),
}

#[derive(Debug, Subcommand)]
pub enum FbmCommand {
    /// One path on the dyadic grid of [0, 1].
    Sample(FbmSampleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    Auto,
    Cholesky,
    Circulant,
}

#[derive(Debug, Args, Serialize)]
pub struct FbmSampleArgs {
    #[arg(long)]
    pub hurst: f64,
    /// Mesh level m; the grid has 2^m cells.
    #[arg(long)]
    pub mesh: u32,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long, value_enum, default_value_t = Sampler::Auto)]
    pub method: Sampler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentMethodArg {
    Closed,
    Wick,
    Interp,
    Mc,
}

#[derive(Debug, Args, Serialize)]
pub struct MomentsArgs {
    /// Letters separated by commas, e.g. 1,1,2,2.
    #[arg(long)]
    pub word: String,
    #[arg(long)]
    pub hurst: f64,
    #[arg(long, value_enum)]
    pub method: MomentMethodArg,
    /// Mesh level for interp (default 12) and mc (default 10).
    #[arg(long)]
    pub mesh: Option<u32>,
    #[arg(long, default_value_t = 100_000)]
    pub replicates: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineArg {
    Closed,
    Wick,
    Interp,
    Mc,
    Commutative,
}

/// Coefficient engine selection shared by gamma, expand and invariant.
#[derive(Debug, Clone, Args, Serialize)]
pub struct EngineArgs {
    #[arg(long, value_enum, default_value_t = EngineArg::Closed)]
    pub engine: EngineArg,
    /// Mesh level of the interp (default 12) and mc (default 10) engines.
    #[arg(long = "engine-mesh")]
    pub engine_mesh: Option<u32>,
    /// Replicates of the mc engine.
    #[arg(long = "engine-replicates", default_value_t = 100_000)]
    pub engine_replicates: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct GammaArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub hurst: f64,
    /// Vector-field file, one field per line.
    #[arg(long)]
    pub fields: PathBuf,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverArg {
    WongZakai,
    Commutative,
}

#[derive(Debug, Args, Serialize)]
pub struct ExpandArgs {
    #[arg(long)]
    pub fields: PathBuf,
    /// Test function as an expression, e.g. "x2^2".
    #[arg(long)]
    pub function: String,
    #[arg(long)]
    pub hurst: f64,
    /// Initial point, comma separated (default: origin).
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<String>,
    /// Truncation order N.
    #[arg(long = "N", default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 0.02)]
    pub t_min: f64,
    #[arg(long, default_value_t = 0.3)]
    pub t_max: f64,
    #[arg(long, default_value_t = 5)]
    pub t_count: usize,
    #[arg(long, value_enum, default_value_t = SolverArg::WongZakai)]
    pub solver: SolverArg,
    /// Wong–Zakai mesh level.
    #[arg(long, default_value_t = 8)]
    pub mesh: u32,
    /// RK4 steps per Wong–Zakai cell.
    #[arg(long, default_value_t = 4)]
    pub substeps: usize,
    /// Tolerance of the commutative flow solver.
    #[arg(long, default_value_t = 1e-10)]
    pub ode_tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub replicates: u64,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Circle,
    Box,
    Density,
    Point,
}

#[derive(Debug, Args, Serialize)]
pub struct InvariantArgs {
    #[arg(long)]
    pub fields: PathBuf,
    #[arg(long)]
    pub hurst: f64,
    #[arg(long, value_enum)]
    pub measure: MeasureKind,
    /// Circle centre, comma separated.
    #[arg(long, allow_hyphen_values = true, default_value = "0,0")]
    pub center: String,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// Circle quadrature nodes.
    #[arg(long, default_value_t = 256)]
    pub nodes: usize,
    /// Box lower corner (box, density).
    #[arg(long, allow_hyphen_values = true)]
    pub lower: Option<String>,
    /// Box upper corner (box, density).
    #[arg(long, allow_hyphen_values = true)]
    pub upper: Option<String>,
    /// Gauss–Legendre order per axis (box, density).
    #[arg(long, default_value_t = 64)]
    pub order: usize,
    /// Density expression (density).
    #[arg(long)]
    pub density: Option<String>,
    /// Location of the point mass (point).
    #[arg(long, allow_hyphen_values = true)]
    pub point: Option<String>,
    /// Test-function file, one expression per line (default: Hermite-windowed
    /// monomials up to degree 4).
    #[arg(long)]
    pub functions: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub k_max: usize,
    /// Residual bounds per k for --assert; the last one repeats.
    #[arg(long, default_value = "1e-8,1e-6")]
    pub tol: String,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SignatureArgs {
    #[arg(long, default_value_t = 5)]
    pub segments: usize,
    #[arg(long, default_value_t = 4)]
    pub degree: usize,
    #[arg(long, default_value_t = 0.5)]
    pub split: f64,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Largest defect accepted by --assert.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}
