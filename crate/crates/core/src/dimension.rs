//! Box-counting estimates of the Minkowski and entropic dimension of an
//! empirical measure.
//!
//! Covers use the dyadic grid anchored at the origin: at scale `j` the cells
//! are `Π [k_i 2^-j, (k_i + 1) 2^-j)` (the last cell is closed at 1). Dyadic
//! counts are within a constant factor of the ℓ∞ covering numbers, so the
//! log-log slopes agree; the counts themselves are a surrogate, not the exact
//! covering numbers.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::stats::ols;

/// Finest scale ever examined.
pub const MAX_SCALE: u32 = 30;

fn check_samples(samples: &[f64], d: usize) -> Result<usize> {
    if d == 0 || !samples.len().is_multiple_of(d) {
        return invalid(format!("{} coordinates do not form rows of dimension {d}", samples.len()));
    }
    if let Some(v) = samples.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return invalid(format!("sample coordinate {v} is outside [0, 1]"));
    }
    Ok(samples.len() / d)
}

/// Number of samples in each occupied cell at scale `j` (arbitrary order).
pub fn cell_counts(samples: &[f64], d: usize, j: u32) -> Result<Vec<usize>> {
    check_samples(samples, d)?;
    if j > MAX_SCALE {
        return invalid(format!("scale {j} exceeds the supported maximum {MAX_SCALE}"));
    }
    let side = (1u64 << j) as f64;
    let top = (1u32 << j) - 1;
    let mut cells: HashMap<Vec<u32>, usize> = HashMap::new();
    for x in samples.chunks(d) {
        let key: Vec<u32> = x.iter().map(|&v| ((v * side) as u32).min(top)).collect();
        *cells.entry(key).or_insert(0) += 1;
    }
    Ok(cells.into_values().collect())
}

/// Number of dyadic cells of side `2^-j` containing at least one sample.
pub fn box_cover(samples: &[f64], d: usize, j: u32) -> Result<usize> {
    Ok(cell_counts(samples, d, j)?.len())
}

/// Fewest dyadic cells of side `2^-j` whose empirical mass is at least
/// `1 - 2^(-j α)`: cells are taken in order of decreasing mass, which is
/// optimal on a fixed partition. Always at least one cell.
pub fn mass_cover(samples: &[f64], d: usize, j: u32, alpha: f64) -> Result<usize> {
    if !(alpha > 0.0) {
        return invalid(format!("alpha must be positive, got {alpha}"));
    }
    let mut counts = cell_counts(samples, d, j)?;
    let n: usize = counts.iter().sum();
    let tau = (-(j as f64) * alpha).exp2();
    // uncovered mass ≤ τ  ⇔  uncovered count ≤ ⌊n τ⌋
    let allowed = ((n as f64) * tau).floor().min(n as f64) as usize;
    let need = n - allowed;
    counts.sort_unstable_by(|a, b| b.cmp(a));
    let mut covered = 0;
    let mut cells = 0;
    while covered < need {
        covered += counts[cells];
        cells += 1;
    }
    Ok(cells.max(1))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CoverKind {
    SupportCover,
    MassCover { alpha: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverProfile {
    pub kind: CoverKind,
    /// Number of samples the profile was computed from.
    pub n: usize,
    pub scales: Vec<u32>,
    pub counts: Vec<usize>,
}

impl CoverProfile {
    /// Computes counts for `j = 0..=j_max`.
    pub fn compute(samples: &[f64], d: usize, kind: CoverKind, j_max: u32) -> Result<Self> {
        let n = check_samples(samples, d)?;
        if n == 0 {
            return invalid("cover profile of an empty sample");
        }
        let scales: Vec<u32> = (0..=j_max).collect();
        let counts = scales
            .iter()
            .map(|&j| match kind {
                CoverKind::SupportCover => box_cover(samples, d, j),
                CoverKind::MassCover { alpha } => mass_cover(samples, d, j, alpha),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { kind, n, scales, counts })
    }

    pub fn epsilon(&self, i: usize) -> f64 {
        (-(self.scales[i] as f64)).exp2()
    }

    /// Default fit window: skip the two coarsest scales and stop at the last
    /// scale whose count is at most `n / 10`. Never narrower than three scales
    /// when the profile has them.
    pub fn default_window(&self) -> (u32, u32) {
        let limit = self.n as f64 / 10.0;
        let j_min = 2.min(self.scales.last().copied().unwrap_or(0));
        let mut j_max = j_min;
        for (&j, &c) in self.scales.iter().zip(&self.counts) {
            if j >= j_min && (c as f64) <= limit {
                j_max = j;
            }
        }
        let last = *self.scales.last().unwrap_or(&0);
        (j_min, j_max.max((j_min + 2).min(last)))
    }

    /// CSV with header `j,epsilon,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,epsilon,count\n");
        for (i, (&j, &c)) in self.scales.iter().zip(&self.counts).enumerate() {
            let _ = writeln!(out, "{j},{:e},{c}", self.epsilon(i));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimEstimate {
    pub slope: f64,
    pub intercept: f64,
    /// `None` when all counts in the window are equal.
    pub r2: Option<f64>,
    pub scale_range: (u32, u32),
}

/// Least-squares slope of `log2 N_j` against `j` over `window` (inclusive).
pub fn fit_dimension(profile: &CoverProfile, window: (u32, u32)) -> Result<DimEstimate> {
    let (lo, hi) = window;
    let (js, logs): (Vec<f64>, Vec<f64>) = profile
        .scales
        .iter()
        .zip(&profile.counts)
        .filter(|(&j, _)| j >= lo && j <= hi)
        .map(|(&j, &c)| (j as f64, (c as f64).log2()))
        .unzip();
    if js.len() < 3 {
        return invalid(format!("window [{lo}, {hi}] holds {} scales of the profile; at least 3 are needed", js.len()));
    }
    if logs.iter().all(|&v| v == logs[0]) {
        return Ok(DimEstimate { slope: 0.0, intercept: logs[0], r2: None, scale_range: window });
    }
    let fit = ols(&js, &logs).expect("distinct scales");
    Ok(DimEstimate { slope: fit.slope, intercept: fit.intercept, r2: fit.r2, scale_range: window })
}

/// Profile up to the scale where every sample sits in its own cell (capped
/// at `j_cap`), fitted over `window` or the default window.
pub fn estimate_dimension(
    samples: &[f64],
    d: usize,
    kind: CoverKind,
    window: Option<(u32, u32)>,
    j_cap: u32,
) -> Result<(CoverProfile, DimEstimate)> {
    let n = check_samples(samples, d)?;
    let mut j_max = j_cap.min(MAX_SCALE);
    if let Some((_, hi)) = window {
        j_max = j_max.max(hi.min(MAX_SCALE));
    } else {
        // stop once all samples are separated
        for j in 0..=j_max {
            if box_cover(samples, d, j)? == n {
                j_max = j.max(4);
                break;
            }
        }
    }
    let profile = CoverProfile::compute(samples, d, kind, j_max)?;
    let window = window.unwrap_or_else(|| profile.default_window());
    let est = fit_dimension(&profile, window)?;
    Ok((profile, est))
}
