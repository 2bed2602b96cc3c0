//! Explicit feed-forward ReLU networks.
//!
//! A [`ReluNet`] is a list of affine maps with ReLU applied between
//! consecutive maps and a final activation at the end:
//! `x -> A_L(relu(A_{L-1}(... relu(A_1 x))))`. Its depth is the number of
//! affine maps, its weight count the number of stored parameters, and its
//! max weight the largest absolute parameter.

pub mod build;
mod io;
mod layer;
mod sizing;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::expfam::{ExpFamily, FamilyKind};

pub use io::NET_FORMAT;
pub use layer::{Csr, Layer, Weights};
pub use sizing::{architect, hidden_width_for, parameter_count_for, SizingRule};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FinalActivation {
    Identity,
    /// Clamp the output to `[-r, r]`.
    Clamp { r: f64 },
    /// Apply the canonical link of the family.
    Link { family: FamilyKind },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReluNet {
    input_dim: usize,
    layers: Vec<Layer>,
    final_activation: FinalActivation,
}

impl ReluNet {
    pub fn new(input_dim: usize, layers: Vec<Layer>, final_activation: FinalActivation) -> Result<Self> {
        if input_dim == 0 {
            return invalid("input dimension must be positive");
        }
        if layers.is_empty() {
            return invalid("a network needs at least one affine map");
        }
        if layers[0].cols() != input_dim {
            return invalid(format!(
                "first layer expects {} inputs but input_dim is {input_dim}",
                layers[0].cols()
            ));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].rows() != pair[1].cols() {
                return invalid(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    pair[0].rows(),
                    i + 1,
                    pair[1].cols()
                ));
            }
        }
        if let FinalActivation::Clamp { r } = final_activation {
            if !(r > 0.0) {
                return invalid(format!("clamp level must be positive, got {r}"));
            }
        }
        Ok(ReluNet { input_dim, layers, final_activation })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(Layer::rows).unwrap_or(0)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn final_activation(&self) -> FinalActivation {
        self.final_activation
    }

    pub fn with_final_activation(mut self, act: FinalActivation) -> Result<Self> {
        if let FinalActivation::Clamp { r } = act {
            if !(r > 0.0) {
                return invalid(format!("clamp level must be positive, got {r}"));
            }
        }
        self.final_activation = act;
        Ok(self)
    }

    /// Number of affine maps, `L`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Stored weights and biases, `W`.
    pub fn weight_count(&self) -> usize {
        self.layers.iter().map(Layer::parameter_count).sum()
    }

    /// Largest absolute parameter, `B`.
    pub fn max_weight(&self) -> f64 {
        self.layers.iter().map(Layer::max_abs).fold(0.0, f64::max)
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(Layer::rows).collect()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return invalid(format!("input has length {} but the network expects {}", x.len(), self.input_dim));
        }
        Ok(())
    }

    /// Output of the last affine map, before the final activation.
    pub fn forward_raw_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            next.resize(layer.rows(), 0.0);
            layer.apply(&cur, &mut next);
            if i < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Scalar output of the last affine map.
    pub fn forward_raw(&self, x: &[f64]) -> Result<f64> {
        if self.output_dim() != 1 {
            return invalid(format!("network has {} outputs; expected a scalar network", self.output_dim()));
        }
        Ok(self.forward_raw_vec(x)?[0])
    }

    /// Evaluates the network including its final activation.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        let raw = self.forward_raw(x)?;
        Ok(match self.final_activation {
            FinalActivation::Identity => raw,
            FinalActivation::Clamp { r } => raw.clamp(-r, r),
            FinalActivation::Link { family } => {
                let fam = ExpFamily::new(family);
                fam.mean(fam.clip_natural(raw))
            }
        })
    }

    /// Maps a raw output to the natural parameter the network predicts:
    /// clamping applies, the link does not.
    #[inline]
    pub fn natural_from_raw(&self, raw: f64) -> f64 {
        match self.final_activation {
            FinalActivation::Clamp { r } => raw.clamp(-r, r),
            _ => raw,
        }
    }

    /// Natural-parameter prediction `f(x)`.
    pub fn predict_natural(&self, x: &[f64]) -> Result<f64> {
        Ok(self.natural_from_raw(self.forward_raw(x)?))
    }

    /// Rewrites a clamped network as a pure ReLU network with identity
    /// output, realizing the clamp as `relu(z + r) - relu(z - r) - r`.
    /// The last affine map is duplicated into two hidden units, so depth
    /// grows by one.
    pub fn export_pure_relu(&self) -> Result<ReluNet> {
        match self.final_activation {
            FinalActivation::Identity => Ok(self.clone()),
            FinalActivation::Link { family } => Err(Error::Capability(format!(
                "the {family} link is not piecewise linear and cannot be exported as ReLU units"
            ))),
            FinalActivation::Clamp { r } => {
                if self.output_dim() != 1 {
                    return invalid("clamp export needs a scalar network");
                }
                let mut layers = self.layers.clone();
                let last = layers.pop().expect("nonempty");
                let mut triplets = Vec::with_capacity(2 * last.entry_count());
                for (row, col, v) in last.triplets() {
                    debug_assert_eq!(row, 0);
                    triplets.push((0, col, v));
                    triplets.push((1, col, v));
                }
                let b = last.bias()[0];
                let hidden = if last.is_dense() {
                    let mut w = Vec::with_capacity(2 * last.cols());
                    w.extend_from_slice(last.values());
                    w.extend_from_slice(last.values());
                    Layer::dense(2, last.cols(), w, vec![b + r, b - r])?
                } else {
                    Layer::from_triplets(2, last.cols(), triplets, vec![b + r, b - r])?
                };
                let out = Layer::dense(1, 2, vec![1.0, -1.0], vec![-r])?;
                layers.push(hidden);
                layers.push(out);
                ReluNet::new(self.input_dim, layers, FinalActivation::Identity)
            }
        }
    }

    /// Converts every layer to sparse storage, keeping all stored entries.
    pub fn to_sparse(&self) -> ReluNet {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                if l.is_dense() {
                    Layer::from_triplets(l.rows(), l.cols(), l.triplets(), l.bias().to_vec()).expect("valid layer")
                } else {
                    l.clone()
                }
            })
            .collect();
        ReluNet { input_dim: self.input_dim, layers, final_activation: self.final_activation }
    }

    /// Dense network with He-style initialization `N(0, 2 / fan_in)` and zero
    /// biases. `widths` lists the hidden widths; the output is scalar.
    pub fn random_dense<R: Rng + ?Sized>(input_dim: usize, widths: &[usize], rng: &mut R) -> Result<Self> {
        if widths.contains(&0) {
            return invalid("hidden widths must be positive");
        }
        let mut dims = vec![input_dim];
        dims.extend_from_slice(widths);
        dims.push(1);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("finite scale");
            let w: Vec<f64> = (0..fan_in * fan_out).map(|_| normal.sample(rng)).collect();
            layers.push(Layer::dense(fan_out, fan_in, w, vec![0.0; fan_out])?);
        }
        ReluNet::new(input_dim, layers, FinalActivation::Identity)
    }

    /// All parameters in a flat vector, layer by layer (weights then biases).
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.weight_count());
        for l in &self.layers {
            out.extend_from_slice(l.values());
            out.extend_from_slice(l.bias());
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.weight_count() {
            return invalid(format!("expected {} parameters, got {}", self.weight_count(), params.len()));
        }
        let mut off = 0;
        for l in &mut self.layers {
            let n = l.entry_count();
            l.values_mut().copy_from_slice(&params[off..off + n]);
            off += n;
            let rows = l.rows();
            l.bias_mut().copy_from_slice(&params[off..off + rows]);
            off += rows;
        }
        Ok(())
    }
}

/// Anything that maps a point of `[0,1]^d` to a natural-parameter prediction.
pub trait Predictor: Sync {
    fn input_dim(&self) -> usize;
    fn predict(&self, x: &[f64]) -> Result<f64>;
}

impl Predictor for ReluNet {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        self.predict_natural(x)
    }
}
