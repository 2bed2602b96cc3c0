//! Empirical Bregman risk minimization for ReLU networks.
//!
//! The network output is read as a natural parameter. Training minimizes
//! the mean of `loss_natural(y_i, f(x_i))`; the gradient seed at the output
//! is `mean(f(x_i)) - y_i`. When the output is clamped (either by the
//! network's clamp or by the family's natural domain) the seed is zero.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::expfam::{ExpFamily, FamilyKind};
use crate::net::{ReluNet, Weights};
use crate::rng::seeded;

/// Above this many samples training switches from full batch to minibatches.
pub const FULL_BATCH_LIMIT: usize = 512;
pub const DEFAULT_MINIBATCH: usize = 64;

/// Samples `x_i` in `[0,1]^d` (row-major) and responses `y_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub dim: usize,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub family: FamilyKind,
}

impl Dataset {
    pub fn new(dim: usize, xs: Vec<f64>, ys: Vec<f64>, family: FamilyKind) -> Result<Self> {
        if dim == 0 {
            return invalid("dataset dimension must be positive");
        }
        if xs.len() != dim * ys.len() {
            return invalid(format!("{} coordinates do not form {} rows of dimension {dim}", xs.len(), ys.len()));
        }
        if let Some(i) = xs.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return invalid(format!("sample {} has coordinate {} outside [0, 1]", i / dim, xs[i]));
        }
        let fam = ExpFamily::new(family);
        let dom = fam.response_domain();
        for (i, &y) in ys.iter().enumerate() {
            let integral = family != FamilyKind::Poisson || y.fract() == 0.0;
            let binary = family != FamilyKind::Bernoulli || y == 0.0 || y == 1.0;
            if !y.is_finite() || !dom.contains(y) || !integral || !binary {
                return invalid(format!("response {i} = {y} is not a valid {family} observation"));
            }
        }
        Ok(Self { dim, xs, ys, family })
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn family(&self) -> ExpFamily {
        ExpFamily::new(self.family)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

impl std::str::FromStr for Optimizer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(Self::Sgd),
            "adam" => Ok(Self::Adam),
            _ => Err(Error::InvalidInput(format!("unknown optimizer '{s}' (expected sgd or adam)"))),
        }
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// `None` picks full batch up to 512 samples and 64 above.
    pub batch_size: Option<usize>,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 200, batch_size: None, learning_rate: 1e-3, optimizer: Optimizer::Adam, seed: 0 }
    }
}

impl TrainConfig {
    pub fn resolved_batch_size(&self, n: usize) -> usize {
        self.batch_size.unwrap_or(if n <= FULL_BATCH_LIMIT { n } else { DEFAULT_MINIBATCH })
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.epochs == 0 {
            return invalid("epochs must be at least 1");
        }
        let b = self.resolved_batch_size(n);
        if b == 0 || b > n {
            return invalid(format!("batch size {b} must lie in [1, {n}]"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return invalid(format!("learning rate {} must be positive", self.learning_rate));
        }
        Ok(())
    }
}

/// Natural parameter used in the loss, and whether it passes gradients.
#[inline]
fn natural(net: &ReluNet, fam: &ExpFamily, raw: f64) -> (f64, bool) {
    let eta = fam.clip_natural(net.natural_from_raw(raw));
    (eta, eta == raw)
}

/// Mean Bregman loss of the network over the dataset. Outputs outside the
/// clamp or natural domain are clipped, never rejected.
pub fn empirical_risk(net: &ReluNet, data: &Dataset) -> Result<f64> {
    check_shapes(net, data)?;
    if data.is_empty() {
        return invalid("empirical risk of an empty dataset");
    }
    let fam = data.family();
    let mut total = 0.0;
    for i in 0..data.len() {
        let raw = net.forward_raw(data.x(i))?;
        let (eta, _) = natural(net, &fam, raw);
        total += fam.loss_natural_unchecked(data.ys[i], eta);
    }
    Ok(total / data.len() as f64)
}

fn check_shapes(net: &ReluNet, data: &Dataset) -> Result<()> {
    if net.input_dim() != data.dim {
        return invalid(format!("network expects {} inputs, data has dimension {}", net.input_dim(), data.dim));
    }
    if net.output_dim() != 1 {
        return invalid("training needs a scalar network");
    }
    Ok(())
}

/// Gradient of the mean loss over a batch, laid out like
/// [`ReluNet::parameters`]: per layer, matrix entries then biases.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub loss: f64,
    flat: Vec<f64>,
    /// `(weights offset, bias offset, end)` per layer.
    spans: Vec<(usize, usize, usize)>,
}

impl Gradients {
    fn zeros(net: &ReluNet) -> Self {
        let mut spans = Vec::with_capacity(net.depth());
        let mut off = 0;
        for l in net.layers() {
            let w = off;
            let b = w + l.entry_count();
            off = b + l.rows();
            spans.push((w, b, off));
        }
        Self { loss: 0.0, flat: vec![0.0; off], spans }
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.flat
    }

    /// Gradient for the stored matrix entries of layer `i`.
    pub fn weights(&self, i: usize) -> &[f64] {
        let (w, b, _) = self.spans[i];
        &self.flat[w..b]
    }

    pub fn bias(&self, i: usize) -> &[f64] {
        let (_, b, e) = self.spans[i];
        &self.flat[b..e]
    }
}

/// Reusable activation buffers for one forward/backward pass.
struct Workspace {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    back: Vec<f64>,
}

impl Workspace {
    fn new(net: &ReluNet) -> Self {
        let mut acts = vec![vec![0.0; net.input_dim()]];
        acts.extend(net.layers().iter().map(|l| vec![0.0; l.rows()]));
        Self { acts, delta: Vec::new(), back: Vec::new() }
    }
}

/// Backpropagation of the mean Bregman loss over the samples `batch`.
pub fn backprop_grads(net: &ReluNet, data: &Dataset, batch: &[usize]) -> Result<Gradients> {
    check_shapes(net, data)?;
    if batch.is_empty() {
        return invalid("gradient of an empty batch");
    }
    if let Some(&i) = batch.iter().find(|&&i| i >= data.len()) {
        return invalid(format!("batch index {i} out of range for {} samples", data.len()));
    }
    let mut grads = Gradients::zeros(net);
    let mut ws = Workspace::new(net);
    accumulate(net, data, batch, &mut grads, &mut ws);
    Ok(grads)
}

fn accumulate(net: &ReluNet, data: &Dataset, batch: &[usize], grads: &mut Gradients, ws: &mut Workspace) {
    let fam = data.family();
    let layers = net.layers();
    let last = layers.len() - 1;
    let scale = 1.0 / batch.len() as f64;
    grads.flat.iter_mut().for_each(|g| *g = 0.0);
    grads.loss = 0.0;

    for &i in batch {
        ws.acts[0].copy_from_slice(data.x(i));
        for (l, layer) in layers.iter().enumerate() {
            let (prev, rest) = ws.acts.split_at_mut(l + 1);
            let out = &mut rest[0];
            layer.apply(&prev[l], out);
            if l < last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        let raw = ws.acts[last + 1][0];
        let y = data.ys[i];
        let (eta, passes) = natural(net, &fam, raw);
        grads.loss += fam.loss_natural_unchecked(y, eta) * scale;
        if !passes {
            continue;
        }
        ws.delta.clear();
        ws.delta.push((fam.grad_psi(eta) - y) * scale);

        for l in (0..=last).rev() {
            let layer = &layers[l];
            let input = &ws.acts[l];
            let (w_off, b_off, _) = grads.spans[l];
            match layer.weights() {
                Weights::Dense(_) => {
                    let cols = layer.cols();
                    for (r, &dr) in ws.delta.iter().enumerate() {
                        if dr == 0.0 {
                            continue;
                        }
                        let row = &mut grads.flat[w_off + r * cols..w_off + (r + 1) * cols];
                        for (g, a) in row.iter_mut().zip(input) {
                            *g += dr * a;
                        }
                    }
                }
                Weights::Sparse(_) => {
                    let delta = &ws.delta;
                    let flat = &mut grads.flat;
                    layer.for_each_entry(|r, c, k, _| flat[w_off + k] += delta[r] * input[c]);
                }
            }
            for (g, d) in grads.flat[b_off..b_off + layer.rows()].iter_mut().zip(&ws.delta) {
                *g += d;
            }
            if l == 0 {
                break;
            }
            ws.back.resize(layer.cols(), 0.0);
            layer.apply_transpose(&ws.delta, &mut ws.back);
            // ReLU derivative: the stored activation is positive iff the unit was active.
            for (b, a) in ws.back.iter_mut().zip(&ws.acts[l]) {
                if *a <= 0.0 {
                    *b = 0.0;
                }
            }
            std::mem::swap(&mut ws.delta, &mut ws.back);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    /// Best iterate on the training risk.
    pub net: ReluNet,
    /// Training risk at the end of each epoch.
    pub trace: Vec<f64>,
    pub initial_risk: f64,
    pub best_risk: f64,
    /// Epoch (1-based) of the best iterate; 0 if the initialization was best.
    pub best_epoch: usize,
}

enum OptState {
    Sgd,
    Adam { m: Vec<f64>, v: Vec<f64>, t: i32 },
}

/// Minimizes the empirical risk from the given initialization. Returns the
/// iterate with the smallest training risk, so the result never has a
/// larger risk than the initialization.
pub fn fit(net: &ReluNet, data: &Dataset, cfg: &TrainConfig) -> Result<FitResult> {
    check_shapes(net, data)?;
    cfg.validate(data.len())?;
    let mut net = net.clone();
    let n = data.len();
    let batch_size = cfg.resolved_batch_size(n);
    let mut rng = seeded(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut params = net.parameters();
    let mut grads = Gradients::zeros(&net);
    let mut ws = Workspace::new(&net);
    let mut state = match cfg.optimizer {
        Optimizer::Sgd => OptState::Sgd,
        Optimizer::Adam => OptState::Adam { m: vec![0.0; params.len()], v: vec![0.0; params.len()], t: 0 },
    };

    let initial_risk = empirical_risk(&net, data)?;
    let mut best = (initial_risk, params.clone(), 0);
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        if batch_size < n {
            order.shuffle(&mut rng);
        }
        for batch in order.chunks(batch_size) {
            accumulate(&net, data, batch, &mut grads, &mut ws);
            if let Some(k) = grads.flat.iter().position(|g| !g.is_finite()) {
                return Err(Error::Training {
                    epoch,
                    message: format!("non-finite gradient in parameter {k}"),
                });
            }
            step(&mut state, &mut params, &grads.flat, cfg.learning_rate);
            net.set_parameters(&params)?;
        }
        let risk = empirical_risk(&net, data)?;
        if !risk.is_finite() {
            return Err(Error::Training { epoch, message: format!("training risk became {risk}") });
        }
        trace.push(risk);
        if risk < best.0 {
            best = (risk, params.clone(), epoch);
        }
    }
    net.set_parameters(&best.1)?;
    Ok(FitResult { net, trace, initial_risk, best_risk: best.0, best_epoch: best.2 })
}

fn step(state: &mut OptState, params: &mut [f64], grads: &[f64], lr: f64) {
    match state {
        OptState::Sgd => {
            for (p, g) in params.iter_mut().zip(grads) {
                *p -= lr * g;
            }
        }
        OptState::Adam { m, v, t } => {
            *t += 1;
            let c1 = 1.0 - ADAM_BETA1.powi(*t);
            let c2 = 1.0 - ADAM_BETA2.powi(*t);
            for (((p, g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
            }
        }
    }
}

/// Loss trace as CSV with header `epoch,train_risk`.
pub fn trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("epoch,train_risk\n");
    for (i, r) in trace.iter().enumerate() {
        let _ = writeln!(out, "{},{r:e}", i + 1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{FinalActivation, Layer};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_linear(w: f64) -> ReluNet {
        ReluNet::new(1, vec![Layer::dense(1, 1, vec![w], vec![0.0]).unwrap()], FinalActivation::Identity).unwrap()
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(1, vec![0.5], vec![0.3], FamilyKind::Bernoulli).is_err());
        assert!(Dataset::new(1, vec![0.5], vec![1.5], FamilyKind::Poisson).is_err());
        assert!(Dataset::new(1, vec![1.5], vec![0.0], FamilyKind::Gaussian).is_err());
        assert!(Dataset::new(2, vec![0.5], vec![0.0], FamilyKind::Gaussian).is_err());
        assert!(Dataset::new(1, vec![0.5], vec![2.0], FamilyKind::Poisson).is_ok());
    }

    #[test]
    fn risk_examples() {
        let data = Dataset::new(1, vec![0.5], vec![1.0], FamilyKind::Gaussian).unwrap();
        assert_eq!(empirical_risk(&scalar_linear(2.0), &data).unwrap(), 0.0);

        let data = Dataset::new(1, vec![0.1, 0.7, 0.9], vec![1.0; 3], FamilyKind::Bernoulli).unwrap();
        let risk = empirical_risk(&scalar_linear(0.0), &data).unwrap();
        assert!((risk - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn single_parameter_gradient() {
        let data = Dataset::new(1, vec![1.0], vec![1.0], FamilyKind::Gaussian).unwrap();
        let g = backprop_grads(&scalar_linear(0.0), &data, &[0]).unwrap();
        assert_eq!(g.weights(0), &[-1.0]);
        assert_eq!(g.bias(0), &[-1.0]);
    }

    #[test]
    fn zero_net_has_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = ReluNet::random_dense(2, &[3, 3], &mut rng).unwrap();
        let zeros = vec![0.0; net.weight_count()];
        net.set_parameters(&zeros).unwrap();
        let data = Dataset::new(2, vec![0.2, 0.4, 0.9, 0.1], vec![0.0, 0.0], FamilyKind::Gaussian).unwrap();
        let g = backprop_grads(&net, &data, &[0, 1]).unwrap();
        assert!(g.as_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicated_sample_has_same_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let net = ReluNet::random_dense(2, &[4], &mut rng).unwrap();
        let data = Dataset::new(2, vec![0.3, 0.8], vec![1.0], FamilyKind::Bernoulli).unwrap();
        let one = backprop_grads(&net, &data, &[0]).unwrap();
        let two = backprop_grads(&net, &data, &[0, 0]).unwrap();
        for (a, b) in one.as_flat().iter().zip(two.as_flat()) {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
        }
    }

    #[test]
    fn sparse_and_dense_gradients_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let net = ReluNet::random_dense(2, &[3, 2], &mut rng).unwrap();
        let xs: Vec<f64> = (0..10).map(|_| rng.random()).collect();
        let data = Dataset::new(2, xs, vec![1.0, 0.0, 2.0, 0.5, -1.0], FamilyKind::Gaussian).unwrap();
        let dense = backprop_grads(&net, &data, &[0, 1, 2, 3, 4]).unwrap();
        let sparse = backprop_grads(&net.to_sparse(), &data, &[0, 1, 2, 3, 4]).unwrap();
        for (a, b) in dense.as_flat().iter().zip(sparse.as_flat()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn clamped_output_stops_gradient() {
        let net = scalar_linear(3.0).with_final_activation(FinalActivation::Clamp { r: 1.0 }).unwrap();
        let data = Dataset::new(1, vec![1.0], vec![0.0], FamilyKind::Gaussian).unwrap();
        let g = backprop_grads(&net, &data, &[0]).unwrap();
        assert!(g.as_flat().iter().all(|&v| v == 0.0));
        assert!((g.loss - 0.5).abs() < 1e-15);
    }

    #[test]
    fn fit_is_deterministic_and_never_worse() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let xs: Vec<f64> = (0..600).map(|_| rng.random()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (3.0 * x).sin() + rng.random::<f64>() - 0.5).collect();
        let data = Dataset::new(1, xs, ys, FamilyKind::Gaussian).unwrap();
        let net = ReluNet::random_dense(1, &[8], &mut rng).unwrap();
        let cfg = TrainConfig { epochs: 15, seed: 3, learning_rate: 1e-2, ..TrainConfig::default() };
        let a = fit(&net, &data, &cfg).unwrap();
        let b = fit(&net, &data, &cfg).unwrap();
        assert_eq!(a.trace.len(), 15);
        assert_eq!(a.trace, b.trace);
        assert!(a.best_risk <= a.initial_risk);
        assert!((empirical_risk(&a.net, &data).unwrap() - a.best_risk).abs() < 1e-12);
    }

    #[test]
    fn nan_gradient_aborts_with_epoch() {
        let net = scalar_linear(f64::NAN);
        let data = Dataset::new(1, vec![0.5], vec![0.0], FamilyKind::Gaussian).unwrap();
        let err = fit(&net, &data, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Training { epoch: 1, .. }), "{err}");
    }

    #[test]
    fn config_validation() {
        let cfg = TrainConfig { batch_size: Some(10), ..TrainConfig::default() };
        assert!(cfg.validate(5).is_err());
        assert!(TrainConfig { epochs: 0, ..TrainConfig::default() }.validate(5).is_err());
        assert!(TrainConfig { learning_rate: 0.0, ..TrainConfig::default() }.validate(5).is_err());
        assert_eq!(TrainConfig::default().resolved_batch_size(512), 512);
        assert_eq!(TrainConfig::default().resolved_batch_size(513), 64);
    }

    #[test]
    fn trace_csv_format() {
        assert_eq!(trace_csv(&[0.5, 0.25]), "epoch,train_risk\n1,5e-1\n2,2.5e-1\n");
    }
}
