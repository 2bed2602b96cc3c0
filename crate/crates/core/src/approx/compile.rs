//! Assembly of local Taylor polynomials into one ReLU network.
//!
//! The cube is tiled by `K^d` cells of side `2ε` with centers
//! `θ_i = ε (2 i + 1)`. Each cell carries a tensor trapezoid whose ramps
//! have half-width `ρ = δ / K`, so neighbouring trapezoids sum to one and
//! every point outside the ramps is owned by exactly one cell. Inside a cell
//! the target is replaced by its Taylor polynomial of degree `⌊β⌋`, written
//! in the rescaled coordinates `u = (x - θ) / (ε + ρ)` so that all product
//! inputs lie in `[-1, 1]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::prod::{build_prod, min_accuracy, ProdNet};
use super::trapezoid::TrapezoidUnit;
use crate::error::{invalid, Error, Result};
use crate::net::build::{compose, pad_to_depth};
use crate::net::{FinalActivation, Layer, Predictor, ReluNet};
use crate::rng::seeded;
use crate::stats::mean_se;
use crate::synth::{floor_beta, multi_indices, HolderTarget};

/// Default largest admissible accuracy target.
pub const DEFAULT_ETA0: f64 = 0.25;
pub const DEFAULT_MC_POINTS: usize = 100_000;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Internal choices derived from the accuracy target `η`:
/// `ε = (η/20)^(1/β)`, `δ = min(ε^(pβ)/d, ε/3)` and
/// `m = ⌈log2(8 / (η d^⌊β⌋))⌉` (raised to the product precondition if needed).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxParams {
    pub eta: f64,
    pub beta: f64,
    pub d: usize,
    pub p: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub m: u32,
}

impl ApproxParams {
    pub fn from_eta(eta: f64, beta: f64, d: usize, p: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return invalid(format!("eta must lie in (0, 1), got {eta}"));
        }
        if !(beta > 0.0) || d == 0 || !(p >= 1.0) {
            return invalid(format!("need beta > 0, d >= 1 and p >= 1 (beta = {beta}, d = {d}, p = {p})"));
        }
        let k = floor_beta(beta);
        let epsilon = (eta / 20.0).powf(1.0 / beta);
        let delta = (epsilon.powf(p * beta) / d as f64).min(epsilon / 3.0);
        let m_rule = (8.0 / (eta * (d as f64).powi(k as i32))).log2().ceil();
        let m = m_rule.max(min_accuracy(d + k).ceil()).max(1.0) as u32;
        Ok(Self { eta, beta, d, p, epsilon, delta, m })
    }
}

/// The closed-form bound of the approximation argument:
/// `2 C d^k / k! δ^β + 2 C 2^-m + 4 C (d δ)^(1/p)` with `k = ⌊β⌋`.
pub fn error_budget(eta: f64, m: u32, delta: f64, beta: f64, d: usize, c: f64, p: f64) -> f64 {
    let _ = eta;
    let k = floor_beta(beta);
    let dk = (d as f64).powi(k as i32) / factorial(k);
    2.0 * c * dk * delta.powf(beta) + 2.0 * c * 0.5f64.powi(m as i32) + 4.0 * c * (d as f64 * delta).powf(1.0 / p)
}

/// Bound that holds for the network built here. On the owned region the
/// Taylor remainder is taken at the plateau radius and the product error at
/// `2^-m`; on the ramps (measure at most `2 d δ`) the error is at most
/// `2C + C d^k/k! (ε+ρ)^β + 2^d C 2^-m`.
pub fn construction_bound(grid: &TaylorGrid, m: u32, c: f64, p: f64) -> f64 {
    let k = grid.k;
    let dk = (grid.d as f64).powi(k as i32) / factorial(k);
    let prod = c * 0.5f64.powi(m as i32);
    let inside = c * dk * grid.plateau.powf(grid.beta) + prod;
    let ramps = 2.0 * c + c * dk * grid.radius.powf(grid.beta) + 2f64.powi(grid.d as i32) * prod;
    inside + ramps * (2.0 * grid.d as f64 * grid.delta).min(1.0).powf(1.0 / p)
}

/// Cell layout and Taylor degree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaylorGrid {
    pub d: usize,
    pub beta: f64,
    /// Taylor degree `⌊β⌋`.
    pub k: usize,
    pub epsilon: f64,
    pub delta: f64,
    /// `K = ⌈1 / (2ε)⌉` cells per axis.
    pub cells_per_dim: usize,
    /// Ramp half-width `δ / K`.
    pub rho: f64,
    /// Support half-width `ε + ρ`; also the coordinate scale.
    pub radius: f64,
    /// Plateau half-width `ε - ρ`.
    pub plateau: f64,
}

impl TaylorGrid {
    pub fn new(epsilon: f64, delta: f64, d: usize, beta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return invalid(format!("epsilon must lie in (0, 1), got {epsilon}"));
        }
        if !(delta > 0.0 && delta <= epsilon / 3.0) {
            return invalid(format!("delta must lie in (0, epsilon/3], got {delta}"));
        }
        if d == 0 || !(beta > 0.0) {
            return invalid("need d >= 1 and beta > 0");
        }
        let cells_per_dim = (1.0 / (2.0 * epsilon)).ceil() as usize;
        if cells_per_dim.checked_pow(d as u32).is_none_or(|c| c > 50_000_000) {
            return invalid(format!("{cells_per_dim}^{d} cells is too many to build"));
        }
        let rho = delta / cells_per_dim as f64;
        Ok(Self {
            d,
            beta,
            k: floor_beta(beta),
            epsilon,
            delta,
            cells_per_dim,
            rho,
            radius: epsilon + rho,
            plateau: epsilon - rho,
        })
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_dim.pow(self.d as u32)
    }

    /// Number of Taylor coefficients per cell, `C(d + k, k)`.
    pub fn coefficient_count(&self) -> usize {
        binomial(self.d + self.k, self.k)
    }

    pub fn center_1d(&self, i: usize) -> f64 {
        self.epsilon * (2 * i + 1) as f64
    }

    /// Center of cell `idx` (row-major, last axis fastest).
    pub fn cell_center(&self, idx: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.d];
        let mut rest = idx;
        for j in (0..self.d).rev() {
            c[j] = self.center_1d(rest % self.cells_per_dim);
            rest /= self.cells_per_dim;
        }
        c
    }

    /// One-dimensional factor as a function of the rescaled coordinate.
    pub fn trapezoid(&self) -> TrapezoidUnit {
        TrapezoidUnit { a: self.radius, b: self.plateau }
    }

    fn nearest(&self, v: f64) -> usize {
        ((v / (2.0 * self.epsilon)).floor().max(0.0) as usize).min(self.cells_per_dim - 1)
    }

    /// The cell whose plateau contains `x`, if any.
    pub fn owning_cell(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for &v in x {
            let i = self.nearest(v);
            if (v - self.center_1d(i)).abs() > self.plateau {
                return None;
            }
            idx = idx * self.cells_per_dim + i;
        }
        Some(idx)
    }

    /// Cells whose trapezoid support contains `x` (at most `2^d`).
    pub fn support_cells(&self, x: &[f64]) -> Vec<usize> {
        let mut cells = vec![0usize];
        for &v in x {
            let i0 = self.nearest(v);
            let lo = i0.saturating_sub(1);
            let hi = (i0 + 1).min(self.cells_per_dim - 1);
            let axis: Vec<usize> = (lo..=hi).filter(|&i| (v - self.center_1d(i)).abs() < self.radius).collect();
            cells = cells.iter().flat_map(|&c| axis.iter().map(move |&i| c * self.cells_per_dim + i)).collect();
        }
        cells
    }
}

/// Subnetwork computing `prod(ξ(u_1), …, ξ(u_d), u^s)` for a cell centered
/// at the origin, with `u = x / radius`.
fn template_net(grid: &TaylorGrid, s: &[usize], prod: &ProdNet) -> Result<ReluNet> {
    let d = grid.d;
    let inv_r = 1.0 / grid.radius;
    // |u_j| = relu(u_j) + relu(-u_j), u_j = relu(u_j) - relu(-u_j)
    let split: Vec<_> = (0..d).flat_map(|j| [(2 * j, j, inv_r), (2 * j + 1, j, -inv_r)]).collect();
    let l0 = Layer::from_triplets(2 * d, d, split, vec![0.0; 2 * d])?;

    // ξ(u) = relu(c (1 - |u|)) - relu(c (b - |u|)) with plateau b (rescaled)
    let b = grid.plateau / grid.radius;
    let c = 1.0 / (1.0 - b);
    let mut t1 = Vec::new();
    let mut b1 = Vec::new();
    let mut carried = Vec::new();
    for j in 0..d {
        let r = b1.len();
        t1.extend([(r, 2 * j, -c), (r, 2 * j + 1, -c), (r + 1, 2 * j, -c), (r + 1, 2 * j + 1, -c)]);
        b1.extend([c, c * b]);
    }
    for (j, &sj) in s.iter().enumerate() {
        if sj > 0 {
            let r = b1.len();
            t1.extend([(r, 2 * j, 1.0), (r + 1, 2 * j + 1, 1.0)]);
            b1.extend([0.0, 0.0]);
            carried.push((j, r, sj));
        }
    }
    let l1 = Layer::from_triplets(b1.len(), 2 * d, t1, b1)?;

    let arity = d + s.iter().sum::<usize>();
    let mut t2 = Vec::new();
    for j in 0..d {
        t2.extend([(j, 2 * j, 1.0), (j, 2 * j + 1, -1.0)]);
    }
    let mut row = d;
    for &(_, r, sj) in &carried {
        for _ in 0..sj {
            t2.extend([(row, r, 1.0), (row, r + 1, -1.0)]);
            row += 1;
        }
    }
    let l2 = Layer::from_triplets(arity, l1.rows(), t2, vec![0.0; arity])?;
    let front = ReluNet::new(d, vec![l0, l1, l2], FinalActivation::Identity)?;
    compose(&prod.net, &front)
}

/// The assembled approximant `Σ_i Σ_s a_{i,s} f_{i,s}(x)`.
///
/// Every `f_{i,s}` is the template for multi-index `s` with its first-layer
/// bias shifted to the cell center, so the whole network is kept in this
/// factored form. [`CompiledNet::to_relu_net`] materializes it.
#[derive(Clone, Debug)]
pub struct CompiledNet {
    grid: TaylorGrid,
    multi_indices: Vec<Vec<usize>>,
    templates: Vec<ReluNet>,
    /// `coeffs[cell * S + s]`, already scaled by `radius^|s|`.
    coeffs: Vec<f64>,
    m: u32,
}

impl CompiledNet {
    pub fn grid(&self) -> &TaylorGrid {
        &self.grid
    }

    pub fn multi_indices(&self) -> &[Vec<usize>] {
        &self.multi_indices
    }

    pub fn templates(&self) -> &[ReluNet] {
        &self.templates
    }

    pub fn coefficients(&self, cell: usize) -> &[f64] {
        let s = self.multi_indices.len();
        &self.coeffs[cell * s..(cell + 1) * s]
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn depth(&self) -> usize {
        self.templates[0].depth()
    }

    pub fn subnet_count(&self) -> usize {
        self.grid.cell_count() * self.multi_indices.len()
    }

    /// Sum of the subnet counts minus the output biases merged into one.
    pub fn weight_count(&self) -> usize {
        let per_cell: usize = self.templates.iter().map(ReluNet::weight_count).sum();
        self.grid.cell_count() * per_cell - (self.subnet_count() - 1)
    }

    fn cell_value(&self, cell: usize, x: &[f64], shifted: &mut [f64]) -> Result<f64> {
        let center = self.grid.cell_center(cell);
        for ((s, &v), c) in shifted.iter_mut().zip(x).zip(&center) {
            *s = v - c;
        }
        let mut total = 0.0;
        for (t, a) in self.templates.iter().zip(self.coefficients(cell)) {
            total += a * t.forward_raw(shifted)?;
        }
        Ok(total)
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.grid.d {
            return invalid(format!("expected {} inputs, got {}", self.grid.d, x.len()));
        }
        Ok(())
    }

    /// Evaluates only the cells whose support contains `x`; the others
    /// contribute zero up to rounding.
    pub fn forward_local(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let mut shifted = vec![0.0; x.len()];
        let mut total = 0.0;
        for cell in self.grid.support_cells(x) {
            total += self.cell_value(cell, x, &mut shifted)?;
        }
        Ok(total)
    }

    /// Evaluates every subnet.
    pub fn forward_full(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let mut shifted = vec![0.0; x.len()];
        let mut total = 0.0;
        for cell in 0..self.grid.cell_count() {
            total += self.cell_value(cell, x, &mut shifted)?;
        }
        Ok(total)
    }

    /// The flat network: subnets side by side on the shared input and one
    /// output unit summing them with the Taylor coefficients. Structural
    /// zeros are kept, so its weight count equals [`CompiledNet::weight_count`].
    pub fn to_relu_net(&self) -> Result<ReluNet> {
        let depth = self.depth();
        let d = self.grid.d;
        let cells = self.grid.cell_count();
        let mut layers = Vec::with_capacity(depth);
        for li in 0..depth {
            let mut triplets = Vec::new();
            let mut bias = Vec::new();
            let (mut row_off, mut col_off) = (0, 0);
            let last = li + 1 == depth;
            let mut out_bias = 0.0;
            for cell in 0..cells {
                let center = self.grid.cell_center(cell);
                for (t, &a) in self.templates.iter().zip(self.coefficients(cell)) {
                    let layer = &t.layers()[li];
                    if last {
                        layer.for_each_entry(|_, c, _, v| triplets.push((0, col_off + c, a * v)));
                        out_bias += a * layer.bias()[0];
                    } else if li == 0 {
                        let mut shift = vec![0.0; layer.rows()];
                        layer.for_each_entry(|r, c, _, v| {
                            triplets.push((row_off + r, c, v));
                            shift[r] -= v * center[c];
                        });
                        bias.extend(layer.bias().iter().zip(&shift).map(|(b, s)| b + s));
                    } else {
                        layer.for_each_entry(|r, c, _, v| triplets.push((row_off + r, col_off + c, v)));
                        bias.extend_from_slice(layer.bias());
                    }
                    row_off += layer.rows();
                    col_off += layer.cols();
                }
            }
            let cols = if li == 0 { d } else { col_off };
            if last {
                bias = vec![out_bias];
                row_off = 1;
            }
            layers.push(Layer::from_triplets(row_off, cols, triplets, bias)?);
        }
        ReluNet::new(d, layers, FinalActivation::Identity)
    }
}

impl Predictor for CompiledNet {
    fn input_dim(&self) -> usize {
        self.grid.d
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        self.forward_local(x)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompileOptions {
    /// Norm order of the reported error.
    pub p: f64,
    /// Largest accepted `η`.
    pub eta0: f64,
    pub mc_points: usize,
    /// Seed of the Monte Carlo points (shared across `η` for comparability).
    pub seed: u64,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self { p: 2.0, eta0: DEFAULT_ETA0, mc_points: DEFAULT_MC_POINTS, seed: 0 }
    }
}

/// What was built and how well it does.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertBundle {
    pub depth: usize,
    pub weights: usize,
    pub m: u32,
    pub epsilon: f64,
    pub delta: f64,
    pub cells_per_dim: usize,
    pub eta: f64,
    pub beta: f64,
    pub d: usize,
    pub p: f64,
    /// Hölder-norm bound `C` of the target.
    pub holder_c: f64,
    /// Monte Carlo `L_p(Leb)` error and its standard error.
    pub measured_error: f64,
    pub standard_error: f64,
    /// [`error_budget`] at the chosen parameters.
    pub bound: f64,
    /// [`construction_bound`] at the chosen parameters.
    pub construction_bound: f64,
    /// `C d^⌊β⌋ η`.
    pub target_bound: f64,
    pub probe_points: usize,
    /// `(depth - 4) / ⌈log2(8/η)⌉`.
    pub theta_depth: f64,
    /// Constant needed in the weight expression of the approximation bound.
    pub theta_weights: f64,
    /// Depth and weights of the largest product network.
    pub prod_depth: usize,
    pub prod_weights: usize,
}

/// Monte Carlo estimate of `‖f̂ - f‖_{L_p(Leb)}` over `[0,1]^d` with its
/// standard error (delta method).
pub fn lp_error(
    predictor: &dyn Predictor,
    target: &HolderTarget,
    p: f64,
    points: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    use rand::Rng;
    let d = predictor.input_dim();
    if points == 0 {
        return invalid("need at least one Monte Carlo point");
    }
    let mut rng = seeded(seed);
    let xs: Vec<f64> = (0..points * d).map(|_| rng.random::<f64>()).collect();
    let errs = xs
        .par_chunks(d)
        .map(|x| Ok((predictor.predict(x)? - target.eval(x)).abs().powf(p)))
        .collect::<Result<Vec<f64>>>()?;
    let (mean, se) = mean_se(&errs);
    let err = mean.powf(1.0 / p);
    let se_err = if mean > 0.0 { se * mean.powf(1.0 / p - 1.0) / p } else { 0.0 };
    Ok((err, se_err))
}

/// Builds the approximant of `target` for accuracy `η` and measures it.
pub fn compile(
    target: &HolderTarget,
    beta: f64,
    d: usize,
    eta: f64,
    opts: &CompileOptions,
) -> Result<(CompiledNet, CertBundle)> {
    if !(eta > 0.0 && eta <= opts.eta0) {
        return invalid(format!("eta = {eta} must lie in (0, {}] (the eta0 threshold)", opts.eta0));
    }
    if target.dim() != d {
        return invalid(format!("target has dimension {} but d = {d}", target.dim()));
    }
    let k = floor_beta(beta);
    if target.max_derivative_order() < k {
        return Err(Error::Capability(format!(
            "target provides derivatives up to order {}, beta = {beta} needs order {k}",
            target.max_derivative_order()
        )));
    }
    let params = ApproxParams::from_eta(eta, beta, d, opts.p)?;
    let grid = TaylorGrid::new(params.epsilon, params.delta, d, beta)?;
    let net = assemble(target, &grid, params.m)?;

    let holder_c = target.holder_norm(beta)?;
    let (measured_error, standard_error) = lp_error(&net, target, opts.p, opts.mc_points, opts.seed)?;
    let depth = net.depth();
    let weights = net.weight_count();
    let log_term = (8.0 / eta).log2().ceil();
    let m_term = (8.0 / (eta * (d as f64).powi(k as i32))).log2().ceil().max(1.0);
    let per_cell = grid.cell_count() as f64 * (3.0 / beta).powf(beta) * ((d + k) as f64).powi(k as i32);
    let widest = build_prod(d + k, params.m)?;
    let bundle = CertBundle {
        depth,
        weights,
        m: params.m,
        epsilon: params.epsilon,
        delta: params.delta,
        cells_per_dim: grid.cells_per_dim,
        eta,
        beta,
        d,
        p: opts.p,
        holder_c,
        measured_error,
        standard_error,
        bound: error_budget(eta, params.m, params.delta, beta, d, holder_c, opts.p),
        construction_bound: construction_bound(&grid, params.m, holder_c, opts.p),
        target_bound: holder_c * (d as f64).powi(k as i32) * eta,
        probe_points: opts.mc_points,
        theta_depth: (depth as f64 - 4.0) / log_term,
        theta_weights: (weights as f64 / per_cell - 8.0 * d as f64 - 4.0 * k as f64) / m_term,
        prod_depth: widest.net.depth(),
        prod_weights: widest.net.weight_count(),
    };
    Ok((net, bundle))
}

/// Builds the factored network for a fixed grid and product accuracy.
pub fn assemble(target: &HolderTarget, grid: &TaylorGrid, m: u32) -> Result<CompiledNet> {
    let indices = multi_indices(grid.d, grid.k);
    let mut templates = Vec::with_capacity(indices.len());
    for s in &indices {
        let prod = build_prod(grid.d + s.iter().sum::<usize>(), m)?;
        templates.push(template_net(grid, s, &prod)?);
    }
    let depth = templates.iter().map(ReluNet::depth).max().expect("at least one multi-index");
    let templates = templates.iter().map(|t| pad_to_depth(t, depth)).collect::<Result<Vec<_>>>()?;

    let scales: Vec<f64> = indices
        .iter()
        .map(|s| {
            let order: usize = s.iter().sum();
            grid.radius.powi(order as i32) / s.iter().map(|&v| factorial(v)).product::<f64>()
        })
        .collect();
    let coeffs = (0..grid.cell_count())
        .into_par_iter()
        .map(|cell| {
            let center = grid.cell_center(cell);
            indices
                .iter()
                .zip(&scales)
                .map(|(s, w)| Ok(target.derivative(&center, s)? * w))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .concat();
    Ok(CompiledNet { grid: grid.clone(), multi_indices: indices, templates, coeffs, m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::BumpSum;

    #[test]
    fn parameter_choices() {
        let p = ApproxParams::from_eta(0.1, 1.0, 1, 2.0).unwrap();
        assert!((p.epsilon - 0.005).abs() < 1e-15);
        assert!((p.delta - 2.5e-5).abs() < 1e-15);
        assert_eq!(p.m, 7);
        let b = error_budget(0.1, p.m, p.delta, 1.0, 1, 1.0, 2.0);
        assert!((b - (2.0 * 2.5e-5 + 2.0 / 128.0 + 4.0 * 0.005)).abs() < 1e-12);
    }

    #[test]
    fn budget_limits() {
        assert!(error_budget(0.1, 60, 1e-30, 1.0, 2, 1.0, 2.0) < 1e-14);
        let a = error_budget(0.1, 6, 0.0, 1.0, 2, 1.0, 2.0);
        let b = error_budget(0.1, 12, 0.0, 1.0, 2, 1.0, 2.0);
        assert!((a / b - 64.0).abs() < 1e-9);
    }

    #[test]
    fn grid_geometry() {
        let g = TaylorGrid::new(0.1, 0.01, 2, 1.0).unwrap();
        assert_eq!(g.cells_per_dim, 5);
        assert_eq!(g.cell_count(), 25);
        assert_eq!(g.coefficient_count(), 3);
        let c = g.cell_center(7);
        assert!((c[0] - 0.3).abs() < 1e-15 && (c[1] - 0.5).abs() < 1e-15);
        assert_eq!(g.owning_cell(&[0.31, 0.52]), Some(7));
        assert_eq!(g.owning_cell(&[0.2, 0.5]), None);
        let mut cells = g.support_cells(&[0.2, 0.5]);
        cells.sort_unstable();
        assert_eq!(cells, vec![2, 7]);
        assert!(TaylorGrid::new(0.1, 0.05, 2, 1.0).is_err());
    }

    #[test]
    fn flat_network_matches_factored_form() {
        let target = HolderTarget::BumpSum(BumpSum::single(2, 2.0, 1.0).unwrap());
        let grid = TaylorGrid::new(0.15, 0.03, 2, 2.0).unwrap();
        let net = assemble(&target, &grid, 5).unwrap();
        let flat = net.to_relu_net().unwrap();
        assert_eq!(flat.depth(), net.depth());
        assert_eq!(flat.weight_count(), net.weight_count());
        let mut rng = seeded(3);
        use rand::Rng;
        for _ in 0..200 {
            let x = [rng.random::<f64>(), rng.random::<f64>()];
            let a = net.forward_local(&x).unwrap();
            let b = net.forward_full(&x).unwrap();
            let c = flat.forward(&x).unwrap();
            assert!((a - b).abs() < 1e-10, "{a} {b}");
            assert!((a - c).abs() < 1e-10, "{a} {c}");
        }
    }

    #[test]
    fn eta_threshold_and_capability() {
        let t = HolderTarget::BumpSum(BumpSum::single(1, 1.0, 1.0).unwrap());
        assert!(compile(&t, 1.0, 1, 0.3, &CompileOptions::default()).is_err());
        let t3 = HolderTarget::BumpSum(BumpSum::single(1, 2.0, 1.0).unwrap());
        let r = compile(&t3, 3.5, 1, 0.2, &CompileOptions::default());
        assert!(matches!(r, Err(Error::Capability(_))));
    }
}
