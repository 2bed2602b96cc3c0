//! Rate sweeps: for a grid of sample sizes, size a network by the `n`-rule,
//! train it, measure its `L2(λ)` distance to the truth by Monte Carlo and
//! fit the log-log slope of the median error against `n`.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dimension::{estimate_dimension, CoverKind, DimEstimate};
use crate::error::{invalid, Error, Result};
use crate::expfam::{ExpFamily, FamilyKind};
use crate::net::{architect, FinalActivation, Predictor, SizingRule};
use crate::rng::{derive_seed, seeded, LabRng};
use crate::stats::{mean_se, median, ols, LinearFit};
use crate::synth::{floor_beta, make_dataset, make_f_omega, sample_lambda, HolderTarget, LambdaSpec, VGCode};
use crate::train::{fit, TrainConfig};

/// Fewest Monte Carlo points accepted by [`l2_error`].
pub const MIN_MC_POINTS: usize = 1000;

/// Monte Carlo mean of `(f̂(x) - f_0(x))^2` over fresh `x ~ λ` with its
/// standard error.
pub fn l2_error(
    predictor: &dyn Predictor,
    target: &HolderTarget,
    lambda: &LambdaSpec,
    mc_points: usize,
    rng: &mut LabRng,
) -> Result<(f64, f64)> {
    if mc_points < MIN_MC_POINTS {
        return invalid(format!("need at least {MIN_MC_POINTS} Monte Carlo points, got {mc_points}"));
    }
    let d = lambda.dim();
    if predictor.input_dim() != d || target.dim() != d {
        return invalid("predictor, target and lambda dimensions differ");
    }
    let xs = sample_lambda(lambda, mc_points, rng)?;
    let sq = xs
        .par_chunks(d)
        .map(|x| Ok((predictor.predict(x)? - target.eval(x)).powi(2)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean_se(&sq))
}

/// Monte Carlo excess risk `E[ℓ(y, f̂(x)) - ℓ(y, f_0(x))]` over fresh
/// `(x, y)` drawn from the model, with its standard error.
pub fn excess_risk(
    predictor: &dyn Predictor,
    target: &HolderTarget,
    lambda: &LambdaSpec,
    family: &ExpFamily,
    mc_points: usize,
    rng: &mut LabRng,
) -> Result<(f64, f64)> {
    if mc_points < MIN_MC_POINTS {
        return invalid(format!("need at least {MIN_MC_POINTS} Monte Carlo points, got {mc_points}"));
    }
    let data = make_dataset(lambda, target, family, mc_points, rng)?;
    let diffs = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let x = data.x(i);
            let y = data.ys[i];
            let fit = family.clip_natural(predictor.predict(x)?);
            let truth = family.clip_natural(target.eval(x));
            Ok(family.loss_natural(y, fit)? - family.loss_natural(y, truth)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean_se(&diffs))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n_grid: Vec<usize>,
    pub seeds_per_n: usize,
    pub beta: f64,
    pub lambda: LambdaSpec,
    pub family: FamilyKind,
    pub target: HolderTarget,
    /// `d` for ambient runs, a user-chosen `d*` for intrinsic runs.
    pub d_effective: f64,
    pub mc_test_points: usize,
    pub master_seed: u64,
    /// Multipliers of the depth and weight rules.
    pub c_depth: f64,
    pub c_width: f64,
    /// Training settings; the seed is replaced per cell.
    pub train: TrainConfig,
    /// Cover-profile scale cap for the dimension cross-reference (0 skips it).
    pub dim_scales: u32,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.len() < 4 {
            return invalid(format!("n_grid needs at least 4 values, got {}", self.n_grid.len()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("n_grid must be strictly increasing");
        }
        if self.n_grid[0] < 2 {
            return invalid("sample sizes must be at least 2");
        }
        if self.seeds_per_n < 3 {
            return invalid(format!("seeds_per_n must be at least 3, got {}", self.seeds_per_n));
        }
        if !(self.beta > 0.0) || !(self.d_effective > 0.0) {
            return invalid("beta and d_effective must be positive");
        }
        if self.mc_test_points < MIN_MC_POINTS {
            return invalid(format!("mc_test_points must be at least {MIN_MC_POINTS}"));
        }
        self.lambda.validate()?;
        if self.target.dim() != self.lambda.dim() {
            return invalid(format!(
                "target dimension {} does not match lambda dimension {}",
                self.target.dim(),
                self.lambda.dim()
            ));
        }
        SizingRule::new(self.beta, self.d_effective, self.n_grid[0], self.lambda.dim())
            .with_constants(self.c_depth, self.c_width)
            .validate()?;
        self.train.validate(self.n_grid[0])
    }

    /// `-2β / (2β + d)` with the ambient dimension.
    pub fn ambient_exponent(&self) -> f64 {
        let d = self.lambda.dim() as f64;
        -2.0 * self.beta / (2.0 * self.beta + d)
    }

    /// `-2β / (2β + d_effective)`.
    pub fn effective_exponent(&self) -> f64 {
        -2.0 * self.beta / (2.0 * self.beta + self.d_effective)
    }
}

/// Outcome of one `(n, seed)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub n: usize,
    pub seed_index: usize,
    pub seed: u64,
    pub depth: usize,
    pub weights: usize,
    pub hidden_width: usize,
    /// `‖f̂ - f_0‖²` and its standard error; NaN when the cell failed.
    pub error: f64,
    pub se: f64,
    pub excess_risk: f64,
    pub excess_risk_se: f64,
    pub train_risk: f64,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub config: SweepConfig,
    pub cells: Vec<CellResult>,
    /// `(n, median error)` over the successful cells of each `n`.
    pub medians: Vec<(usize, f64)>,
    /// Fit of `ln(median error)` on `ln n`; `None` with fewer than two usable medians.
    pub fit: Option<LinearFit>,
    pub ambient_exponent: f64,
    pub effective_exponent: f64,
    /// `d^(2⌊β⌋(β+d)/(2β+d))`, printed but never asserted.
    pub dimension_prefactor: f64,
    pub dimension_estimate: Option<DimEstimate>,
    pub failed_cells: usize,
    /// Consecutive `n` pairs where the median did not increase.
    pub monotone_pairs: usize,
}

impl RateReport {
    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }

    /// `n,seed_index,seed,depth,weights,width,error,se,excess_risk,excess_risk_se,train_risk,failure`
    pub fn cells_csv(&self) -> String {
        let mut out =
            String::from("n,seed_index,seed,depth,weights,width,error,se,excess_risk,excess_risk_se,train_risk,failure\n");
        for c in &self.cells {
            let failure = c.failure.as_deref().unwrap_or("").replace([',', '\n'], ";");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{:e},{:e},{:e},{:e},{:e},{}",
                c.n,
                c.seed_index,
                c.seed,
                c.depth,
                c.weights,
                c.hidden_width,
                c.error,
                c.se,
                c.excess_risk,
                c.excess_risk_se,
                c.train_risk,
                failure
            );
        }
        out
    }

    /// Two columns `ln n` and `ln median` for plotting, with the fitted line
    /// in a comment.
    pub fn gnuplot(&self) -> String {
        let mut out = String::new();
        if let Some(f) = &self.fit {
            let _ = writeln!(out, "# fit: ln(err) = {:.6} + {:.6} ln(n)", f.intercept, f.slope);
        }
        let _ = writeln!(out, "# ln_n ln_median_error");
        for &(n, m) in &self.medians {
            let _ = writeln!(out, "{:.9} {:.9}", (n as f64).ln(), m.ln());
        }
        out
    }

    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Summary<'a> {
            medians: &'a [(usize, f64)],
            slope: Option<f64>,
            slope_se: Option<f64>,
            ambient_exponent: f64,
            effective_exponent: f64,
            dimension_prefactor: f64,
            dimension_estimate: &'a Option<DimEstimate>,
            failed_cells: usize,
            monotone_pairs: usize,
            consecutive_pairs: usize,
            config: &'a SweepConfig,
        }
        let s = Summary {
            medians: &self.medians,
            slope: self.fit.map(|f| f.slope),
            slope_se: self.fit.map(|f| f.slope_se),
            ambient_exponent: self.ambient_exponent,
            effective_exponent: self.effective_exponent,
            dimension_prefactor: self.dimension_prefactor,
            dimension_estimate: &self.dimension_estimate,
            failed_cells: self.failed_cells,
            monotone_pairs: self.monotone_pairs,
            consecutive_pairs: self.medians.len().saturating_sub(1),
            config: &self.config,
        };
        Ok(serde_json::to_string_pretty(&s)?)
    }
}

/// `2C`, or 1 for the zero function whose class would otherwise collapse.
pub fn clamp_level(holder_c: f64) -> f64 {
    if holder_c > 0.0 {
        2.0 * holder_c
    } else {
        1.0
    }
}

fn run_cell(cfg: &SweepConfig, family: &ExpFamily, holder_c: f64, n: usize, seed_index: usize) -> CellResult {
    let seed = derive_seed(cfg.master_seed, &[n as u64, seed_index as u64]);
    let mut cell = CellResult {
        n,
        seed_index,
        seed,
        depth: 0,
        weights: 0,
        hidden_width: 0,
        error: f64::NAN,
        se: f64::NAN,
        excess_risk: f64::NAN,
        excess_risk_se: f64::NAN,
        train_risk: f64::NAN,
        failure: None,
    };
    let outcome = (|| -> Result<()> {
        let d = cfg.lambda.dim();
        let data = make_dataset(&cfg.lambda, &cfg.target, family, n, &mut seeded(derive_seed(seed, &[0])))?;
        let rule = SizingRule::new(cfg.beta, cfg.d_effective, n, d).with_constants(cfg.c_depth, cfg.c_width);
        let (depth, weights) = rule.size_for()?;
        let net = architect(depth, weights, d, &mut seeded(derive_seed(seed, &[1])))?
            .with_final_activation(FinalActivation::Clamp { r: clamp_level(holder_c) })?;
        cell.depth = net.depth();
        cell.weights = net.weight_count();
        cell.hidden_width = net.hidden_widths().first().copied().unwrap_or(0);
        let train = TrainConfig { seed: derive_seed(seed, &[2]), ..cfg.train.clone() };
        let fitted = fit(&net, &data, &train)?;
        cell.train_risk = fitted.best_risk;
        let (e, se) = l2_error(&fitted.net, &cfg.target, &cfg.lambda, cfg.mc_test_points, &mut seeded(derive_seed(seed, &[3])))?;
        let (r, rse) = excess_risk(
            &fitted.net,
            &cfg.target,
            &cfg.lambda,
            family,
            cfg.mc_test_points,
            &mut seeded(derive_seed(seed, &[4])),
        )?;
        if !e.is_finite() {
            return Err(Error::Training { epoch: fitted.best_epoch, message: "non-finite test error".into() });
        }
        (cell.error, cell.se, cell.excess_risk, cell.excess_risk_se) = (e, se, r, rse);
        Ok(())
    })();
    if let Err(e) = outcome {
        cell.failure = Some(e.to_string());
        cell.error = f64::NAN;
    }
    cell
}

/// Runs every `(n, seed)` cell on the current rayon pool. Results do not
/// depend on the number of threads.
pub fn run_sweep(cfg: &SweepConfig) -> Result<RateReport> {
    cfg.validate()?;
    let family = ExpFamily::new(cfg.family);
    let holder_c = cfg.target.holder_norm(cfg.beta)?;
    let jobs: Vec<(usize, usize)> =
        cfg.n_grid.iter().flat_map(|&n| (0..cfg.seeds_per_n).map(move |s| (n, s))).collect();
    // largest n first so long cells start early
    let mut cells: Vec<CellResult> =
        jobs.par_iter().rev().map(|&(n, s)| run_cell(cfg, &family, holder_c, n, s)).collect();
    cells.reverse();

    let medians: Vec<(usize, f64)> = cfg
        .n_grid
        .iter()
        .filter_map(|&n| {
            let errs: Vec<f64> = cells.iter().filter(|c| c.n == n && c.failure.is_none()).map(|c| c.error).collect();
            median(&errs).filter(|m| *m > 0.0).map(|m| (n, m))
        })
        .collect();
    let lx: Vec<f64> = medians.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ly: Vec<f64> = medians.iter().map(|&(_, m)| m.ln()).collect();
    let fit = ols(&lx, &ly);
    let monotone_pairs = medians.windows(2).filter(|w| w[1].1 <= w[0].1).count();

    let d = cfg.lambda.dim() as f64;
    let k = floor_beta(cfg.beta) as f64;
    let dimension_prefactor = d.powf(2.0 * k * (cfg.beta + d) / (2.0 * cfg.beta + d));
    let dimension_estimate = if cfg.dim_scales > 0 {
        let n = *cfg.n_grid.last().expect("validated");
        let xs = sample_lambda(&cfg.lambda, n, &mut seeded(derive_seed(cfg.master_seed, &[u64::MAX])))?;
        let kind = CoverKind::MassCover { alpha: 2.0 * cfg.beta };
        estimate_dimension(&xs, cfg.lambda.dim(), kind, None, cfg.dim_scales).ok().map(|(_, e)| e)
    } else {
        None
    };

    Ok(RateReport {
        config: cfg.clone(),
        failed_cells: cells.iter().filter(|c| c.failure.is_some()).count(),
        cells,
        medians,
        fit,
        ambient_exponent: cfg.ambient_exponent(),
        effective_exponent: cfg.effective_exponent(),
        dimension_prefactor,
        dimension_estimate,
        monotone_pairs,
    })
}

/// Runs the sweep on a dedicated pool of `jobs` threads.
pub fn run_sweep_with_jobs(cfg: &SweepConfig, jobs: usize) -> Result<RateReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start {jobs} worker threads: {e}")))?;
    pool.install(|| run_sweep(cfg))
}

/// Pairwise separations of the bump sums indexed by a packing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub pairs: usize,
    /// `∫ h^2` of one bump.
    pub bump_l2_sq: f64,
    /// `(m^d / 8) ∫ h^2`.
    pub required: f64,
    /// Smallest `‖f_ω - f_ω'‖²` over the checked pairs.
    pub min_separation: f64,
    /// `min_separation / required`.
    pub min_ratio: f64,
    pub violations: usize,
}

/// Checks `‖f_ω - f_ω'‖² ≥ (m^d/8) a² (δ/2)^(2β+d) (∫b²)^d` for all pairs of
/// the code, using that distinct bumps have disjoint supports so the squared
/// distance is the Hamming distance times the energy of one bump.
pub fn separation_check(code: &VGCode, beta: f64, holder_c: f64) -> Result<SeparationReport> {
    if code.len > 64 {
        return invalid(format!("separation check needs m^d <= 64, got {}", code.len));
    }
    let HolderTarget::BumpSum(bumps) = make_f_omega(code, &vec![true; code.len], beta, holder_c)? else {
        unreachable!("packing members are bump sums")
    };
    let energy = bumps.bump_l2_sq();
    let required = code.len as f64 / 8.0 * energy;
    let n = code.len_words();
    let mut pairs = 0;
    let mut violations = 0;
    let mut min_sep = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let sep = code.distance(i, j) as f64 * energy;
            pairs += 1;
            if sep < required {
                violations += 1;
            }
            min_sep = min_sep.min(sep);
        }
    }
    Ok(SeparationReport {
        pairs,
        bump_l2_sq: energy,
        required,
        min_separation: min_sep,
        min_ratio: min_sep / required,
        violations,
    })
}
