//! Resolved per-command configurations. Precedence: built-in defaults, then
//! the TOML file given with `--config`, then command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use eflab_core::approx::{DEFAULT_ETA0, DEFAULT_MC_POINTS};
use eflab_core::train::TrainConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_OUTPUT_DIR: &str = "eflab-out";

fn d<T: std::fmt::Debug>(text: &str, value: T) -> String {
    format!("{text} [default: {value:?}]")
}

fn load_toml<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("--config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("--config {}: {e}", path.display())))
}

macro_rules! overlay {
    ($cfg:ident, $args:ident; $($field:ident),* $(,)?) => {
        $(if let Some(v) = $args.$field.clone() {
            $cfg.$field = v;
        })*
    };
}

macro_rules! overlay_opt {
    ($cfg:ident, $args:ident; $($field:ident),* $(,)?) => {
        $(if let Some(v) = $args.$field.clone() {
            $cfg.$field = Some(v);
        })*
    };
}

// ---------------------------------------------------------------- gen

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub family: String,
    pub lambda: String,
    pub d: usize,
    pub n: usize,
    pub target: String,
    pub beta: f64,
    pub holder_c: f64,
    pub cantor_levels: u32,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            family: "gaussian".into(),
            lambda: "uniform".into(),
            d: 2,
            n: 1000,
            target: "bump".into(),
            beta: 1.0,
            holder_c: 1.0,
            cantor_levels: 10,
            seed: 0,
            output_dir: DEFAULT_OUTPUT_DIR.into(),
        }
    }
}

#[derive(Args, Debug, Default)]
pub struct GenArgs {
    /// TOML file with any of the options below (flags take precedence).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, help = d("Response family: gaussian, bernoulli or poisson", GenConfig::default().family))]
    pub family: Option<String>,
    #[arg(long, help = d("Explanatory distribution: uniform, curve, sheet or cantor", GenConfig::default().lambda))]
    pub lambda: Option<String>,
    #[arg(long, help = d("Ambient dimension", GenConfig::default().d))]
    pub d: Option<usize>,
    #[arg(long, help = d("Number of samples", GenConfig::default().n))]
    pub n: Option<usize>,
    #[arg(long, help = d(
        "Ground truth: constant:<c>, bump, bump-sum:<m>, smooth-poly[:<a>], multiscale:<levels>[:<seed>]",
        GenConfig::default().target
    ))]
    pub target: Option<String>,
    #[arg(long, help = d("Smoothness of the target", GenConfig::default().beta))]
    pub beta: Option<f64>,
    #[arg(long, help = d("Hölder-norm bound C of bump targets", GenConfig::default().holder_c))]
    pub holder_c: Option<f64>,
    #[arg(long, help = d("Ternary levels of the Cantor measure", GenConfig::default().cantor_levels))]
    pub cantor_levels: Option<u32>,
    #[arg(long, help = d("Seed", GenConfig::default().seed))]
    pub seed: Option<u64>,
    #[arg(long, help = d("Directory receiving all outputs", GenConfig::default().output_dir))]
    pub output_dir: Option<PathBuf>,
}

impl GenArgs {
    pub fn resolve(&self) -> Result<GenConfig, CliError> {
        let mut cfg: GenConfig = load_toml(self.config.as_deref())?;
        overlay!(cfg, self; family, lambda, d, n, target, beta, holder_c, cantor_levels, seed, output_dir);
        Ok(cfg)
    }
}

// ---------------------------------------------------------------- train

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainCmdConfig {
    pub data: PathBuf,
    /// Sidecar JSON; defaults to the data path with a `.json` extension.
    pub sidecar: Option<PathBuf>,
    /// Needed only when there is no sidecar.
    pub family: Option<String>,
    pub auto_size: bool,
    pub beta: f64,
    /// Defaults to the input dimension.
    pub d_effective: Option<f64>,
    pub c_depth: f64,
    pub c_width: f64,
    pub depth: usize,
    pub weights: usize,
    /// Output clamp level; defaults to 2C from the sidecar target, none without one.
    pub clamp: Option<f64>,
    pub epochs: usize,
    pub batch_size: Option<usize>,
    pub learning_rate: f64,
    pub optimizer: String,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for TrainCmdConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            data: PathBuf::new(),
            sidecar: None,
            family: None,
            auto_size: false,
            beta: 1.0,
            d_effective: None,
            c_depth: 1.0,
            c_width: 1.0,
            depth: 3,
            weights: 256,
            clamp: None,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            optimizer: "adam".into(),
            seed: 0,
            output_dir: DEFAULT_OUTPUT_DIR.into(),
        }
    }
}

#[derive(Args, Debug, Default)]
pub struct TrainArgs {
    /// TOML file with any of the options below (flags take precedence).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset CSV (x1,...,xd,y) [required].
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Sidecar JSON [default: the data path with extension .json]
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    /// Response family when there is no sidecar [default: from the sidecar]
    #[arg(long)]
    pub family: Option<String>,
    /// Size the network from n, beta and the effective dimension [default: false]
    #[arg(long)]
    pub auto_size: bool,
    #[arg(long, help = d("Smoothness used by --auto-size", TrainCmdConfig::default().beta))]
    pub beta: Option<f64>,
    /// Effective dimension used by --auto-size [default: the input dimension]
    #[arg(long)]
    pub d_effective: Option<f64>,
    #[arg(long, help = d("Depth multiplier of --auto-size", TrainCmdConfig::default().c_depth))]
    pub c_depth: Option<f64>,
    #[arg(long, help = d("Weight multiplier of --auto-size", TrainCmdConfig::default().c_width))]
    pub c_width: Option<f64>,
    #[arg(long, help = d("Depth without --auto-size", TrainCmdConfig::default().depth))]
    pub depth: Option<usize>,
    #[arg(long, help = d("Parameter budget without --auto-size", TrainCmdConfig::default().weights))]
    pub weights: Option<usize>,
    /// Clamp the output to [-r, r] [default: 2C from the sidecar target]
    #[arg(long)]
    pub clamp: Option<f64>,
    #[arg(long, help = d("Epochs", TrainCmdConfig::default().epochs))]
    pub epochs: Option<usize>,
    /// Minibatch size [default: full batch up to 512 samples, else 64]
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, help = d("Learning rate", TrainCmdConfig::default().learning_rate))]
    pub learning_rate: Option<f64>,
    #[arg(long, help = d("Optimizer: sgd or adam", TrainCmdConfig::default().optimizer))]
    pub optimizer: Option<String>,
    #[arg(long, help = d("Seed of initialization and batch order", TrainCmdConfig::default().seed))]
    pub seed: Option<u64>,
    #[arg(long, help = d("Directory receiving all outputs", TrainCmdConfig::default().output_dir))]
    pub output_dir: Option<PathBuf>,
}

impl TrainArgs {
    pub fn resolve(&self) -> Result<TrainCmdConfig, CliError> {
        let mut cfg: TrainCmdConfig = load_toml(self.config.as_deref())?;
        overlay!(cfg, self; data, beta, c_depth, c_width, depth, weights, epochs, learning_rate, optimizer, seed, output_dir);
        overlay_opt!(cfg, self; sidecar, family, d_effective, clamp, batch_size);
        cfg.auto_size |= self.auto_size;
        if cfg.data.as_os_str().is_empty() {
            return Err(CliError::Config("--data is required".into()));
        }
        Ok(cfg)
    }
}

// ---------------------------------------------------------------- approx

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApproxCmdConfig {
    pub target: String,
    pub beta: f64,
    pub d: usize,
    pub eta: f64,
    pub p: f64,
    pub eta0: f64,
    pub holder_c: f64,
    pub mc_points: usize,
    pub seed: u64,
    /// Largest weight count for which the flat network is written out.
    pub save_net_limit: usize,
    pub output_dir: PathBuf,
}

impl Default for ApproxCmdConfig {
    fn default() -> Self {
        Self {
            target: "bump".into(),
            beta: 1.0,
            d: 1,
            eta: 0.1,
            p: 2.0,
            eta0: DEFAULT_ETA0,
            holder_c: 1.0,
            mc_points: DEFAULT_MC_POINTS,
            seed: 0,
            save_net_limit: 200_000,
            output_dir: DEFAULT_OUTPUT_DIR.into(),
        }
    }
}

#[derive(Args, Debug, Default)]
pub struct ApproxArgs {
    /// TOML file with any of the options below (flags take precedence).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, help = d("Function to approximate (same syntax as gen --target)", ApproxCmdConfig::default().target))]
    pub target: Option<String>,
    #[arg(long, help = d("Smoothness", ApproxCmdConfig::default().beta))]
    pub beta: Option<f64>,
    #[arg(long, help = d("Input dimension", ApproxCmdConfig::default().d))]
    pub d: Option<usize>,
    #[arg(long, help = d("Accuracy target", ApproxCmdConfig::default().eta))]
    pub eta: Option<f64>,
    #[arg(long, help = d("Norm order of the reported error", ApproxCmdConfig::default().p))]
    pub p: Option<f64>,
    #[arg(long, help = d("Largest accepted eta", ApproxCmdConfig::default().eta0))]
    pub eta0: Option<f64>,
    #[arg(long, help = d("Hölder-norm bound C of bump targets", ApproxCmdConfig::default().holder_c))]
    pub holder_c: Option<f64>,
    #[arg(long, help = d("Monte Carlo points for the error", ApproxCmdConfig::default().mc_points))]
    pub mc_points: Option<usize>,
    #[arg(long, help = d("Seed of the Monte Carlo points", ApproxCmdConfig::default().seed))]
    pub seed: Option<u64>,
    #[arg(long, help = d("Write model.json only up to this many weights", ApproxCmdConfig::default().save_net_limit))]
    pub save_net_limit: Option<usize>,
    #[arg(long, help = d("Directory receiving all outputs", ApproxCmdConfig::default().output_dir))]
    pub output_dir: Option<PathBuf>,
}

impl ApproxArgs {
    pub fn resolve(&self) -> Result<ApproxCmdConfig, CliError> {
        let mut cfg: ApproxCmdConfig = load_toml(self.config.as_deref())?;
        overlay!(cfg, self; target, beta, d, eta, p, eta0, holder_c, mc_points, seed, save_net_limit, output_dir);
        Ok(cfg)
    }
}

// ---------------------------------------------------------------- dim

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimCmdConfig {
    /// Dataset CSV; when absent, samples are drawn from `lambda`.
    pub data: Option<PathBuf>,
    pub lambda: String,
    pub d: usize,
    pub n: usize,
    pub cantor_levels: u32,
    pub seed: u64,
    /// `support` or `mass`.
    pub kind: String,
    /// Mass-cover exponent; defaults to 2 beta.
    pub alpha: Option<f64>,
    pub beta: f64,
    /// Inclusive scale window `[lo, hi]`; defaults to the profile's window.
    pub window: Option<[u32; 2]>,
    pub scales: u32,
    pub output_dir: PathBuf,
}

impl Default for DimCmdConfig {
    fn default() -> Self {
        Self {
            data: None,
            lambda: "uniform".into(),
            d: 2,
            n: 100_000,
            cantor_levels: 10,
            seed: 0,
            kind: "support".into(),
            alpha: None,
            beta: 1.0,
            window: None,
            scales: 12,
            output_dir: DEFAULT_OUTPUT_DIR.into(),
        }
    }
}

#[derive(Args, Debug, Default)]
pub struct DimArgs {
    /// TOML file with any of the options below (flags take precedence).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset CSV to analyse [default: draw samples from --lambda]
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, help = d("Distribution to sample: uniform, curve, sheet or cantor", DimCmdConfig::default().lambda))]
    pub lambda: Option<String>,
    #[arg(long, help = d("Ambient dimension of --lambda", DimCmdConfig::default().d))]
    pub d: Option<usize>,
    #[arg(long, help = d("Samples drawn from --lambda", DimCmdConfig::default().n))]
    pub n: Option<usize>,
    #[arg(long, help = d("Ternary levels of the Cantor measure", DimCmdConfig::default().cantor_levels))]
    pub cantor_levels: Option<u32>,
    #[arg(long, help = d("Seed", DimCmdConfig::default().seed))]
    pub seed: Option<u64>,
    #[arg(long, help = d("Cover: support or mass", DimCmdConfig::default().kind))]
    pub kind: Option<String>,
    /// Mass-cover exponent [default: 2 * beta]
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, help = d("Smoothness setting the default alpha", DimCmdConfig::default().beta))]
    pub beta: Option<f64>,
    /// Scale window as lo,hi [default: scales 2.. with at most n/10 cells]
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub window: Option<Vec<u32>>,
    #[arg(long, help = d("Finest dyadic scale examined", DimCmdConfig::default().scales))]
    pub scales: Option<u32>,
    #[arg(long, help = d("Directory receiving all outputs", DimCmdConfig::default().output_dir))]
    pub output_dir: Option<PathBuf>,
}

impl DimArgs {
    pub fn resolve(&self) -> Result<DimCmdConfig, CliError> {
        let mut cfg: DimCmdConfig = load_toml(self.config.as_deref())?;
        overlay!(cfg, self; lambda, d, n, cantor_levels, seed, kind, beta, scales, output_dir);
        overlay_opt!(cfg, self; data, alpha);
        if let Some(w) = &self.window {
            cfg.window = Some([w[0], w[1]]);
        }
        Ok(cfg)
    }
}

// ---------------------------------------------------------------- sweep

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepCmdConfig {
    pub n_grid: Vec<usize>,
    pub seeds_per_n: usize,
    pub beta: f64,
    pub lambda: String,
    pub d: usize,
    pub cantor_levels: u32,
    pub family: String,
    pub target: String,
    pub holder_c: f64,
    /// Defaults to the ambient dimension.
    pub d_effective: Option<f64>,
    pub mc_points: usize,
    pub seed: u64,
    pub c_depth: f64,
    pub c_width: f64,
    pub epochs: usize,
    pub batch_size: Option<usize>,
    pub learning_rate: f64,
    pub optimizer: String,
    pub dim_scales: u32,
    pub output_dir: PathBuf,
}

impl Default for SweepCmdConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            n_grid: vec![256, 512, 1024, 2048, 4096, 8192],
            seeds_per_n: 5,
            beta: 1.0,
            lambda: "uniform".into(),
            d: 2,
            cantor_levels: 10,
            family: "gaussian".into(),
            target: "bump".into(),
            holder_c: 1.0,
            d_effective: None,
            mc_points: 20_000,
            seed: 0,
            c_depth: 1.0,
            c_width: 1.0,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            optimizer: "adam".into(),
            dim_scales: 12,
            output_dir: DEFAULT_OUTPUT_DIR.into(),
        }
    }
}

#[derive(Args, Debug, Default)]
pub struct SweepArgs {
    /// TOML file with any of the options below (flags take precedence).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', help = d("Sample sizes, comma separated", SweepCmdConfig::default().n_grid))]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long, help = d("Repetitions per sample size", SweepCmdConfig::default().seeds_per_n))]
    pub seeds_per_n: Option<usize>,
    #[arg(long, help = d("Smoothness", SweepCmdConfig::default().beta))]
    pub beta: Option<f64>,
    #[arg(long, help = d("Explanatory distribution", SweepCmdConfig::default().lambda))]
    pub lambda: Option<String>,
    #[arg(long, help = d("Ambient dimension", SweepCmdConfig::default().d))]
    pub d: Option<usize>,
    #[arg(long, help = d("Ternary levels of the Cantor measure", SweepCmdConfig::default().cantor_levels))]
    pub cantor_levels: Option<u32>,
    #[arg(long, help = d("Response family", SweepCmdConfig::default().family))]
    pub family: Option<String>,
    #[arg(long, help = d("Ground truth (same syntax as gen --target)", SweepCmdConfig::default().target))]
    pub target: Option<String>,
    #[arg(long, help = d("Hölder-norm bound C of bump targets", SweepCmdConfig::default().holder_c))]
    pub holder_c: Option<f64>,
    /// Dimension in the sizing rule and the second exponent [default: the ambient dimension]
    #[arg(long)]
    pub d_effective: Option<f64>,
    #[arg(long, help = d("Monte Carlo points per test error", SweepCmdConfig::default().mc_points))]
    pub mc_points: Option<usize>,
    #[arg(long, help = d("Master seed", SweepCmdConfig::default().seed))]
    pub seed: Option<u64>,
    #[arg(long, help = d("Depth multiplier", SweepCmdConfig::default().c_depth))]
    pub c_depth: Option<f64>,
    #[arg(long, help = d("Weight multiplier", SweepCmdConfig::default().c_width))]
    pub c_width: Option<f64>,
    #[arg(long, help = d("Epochs per cell", SweepCmdConfig::default().epochs))]
    pub epochs: Option<usize>,
    /// Minibatch size [default: full batch up to 512 samples, else 64]
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, help = d("Learning rate", SweepCmdConfig::default().learning_rate))]
    pub learning_rate: Option<f64>,
    #[arg(long, help = d("Optimizer: sgd or adam", SweepCmdConfig::default().optimizer))]
    pub optimizer: Option<String>,
    #[arg(long, help = d("Finest scale of the dimension cross-check, 0 to skip", SweepCmdConfig::default().dim_scales))]
    pub dim_scales: Option<u32>,
    /// Worker threads; results do not depend on it [default: all cores]
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, help = d("Directory receiving all outputs", SweepCmdConfig::default().output_dir))]
    pub output_dir: Option<PathBuf>,
}

impl SweepArgs {
    pub fn resolve(&self) -> Result<SweepCmdConfig, CliError> {
        let mut cfg: SweepCmdConfig = load_toml(self.config.as_deref())?;
        overlay!(cfg, self; n_grid, seeds_per_n, beta, lambda, d, cantor_levels, family, target, holder_c,
            mc_points, seed, c_depth, c_width, epochs, learning_rate, optimizer, dim_scales, output_dir);
        overlay_opt!(cfg, self; d_effective, batch_size);
        Ok(cfg)
    }
}
