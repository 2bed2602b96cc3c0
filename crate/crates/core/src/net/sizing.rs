use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ReluNet;
use crate::error::{invalid, Error, Result};

/// Network sizing `L ~ ln n`, `W ~ n^{d/(2 beta + d)} ln n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizingRule {
    pub beta: f64,
    /// Ambient dimension `d`, or an intrinsic bound `d*`.
    pub dim_effective: f64,
    pub n: usize,
    pub input_dim: usize,
    pub c_depth: f64,
    pub c_width: f64,
}

impl SizingRule {
    pub fn new(beta: f64, dim_effective: f64, n: usize, input_dim: usize) -> Self {
        SizingRule { beta, dim_effective, n, input_dim, c_depth: 1.0, c_width: 1.0 }
    }

    pub fn with_constants(mut self, c_depth: f64, c_width: f64) -> Self {
        self.c_depth = c_depth;
        self.c_width = c_width;
        self
    }

    /// `d / (2 beta + d)` with `d = dim_effective`.
    pub fn width_exponent(&self) -> f64 {
        self.dim_effective / (2.0 * self.beta + self.dim_effective)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return invalid(format!("sizing needs n >= 2, got {}", self.n));
        }
        if !(self.beta > 0.0) || !(self.dim_effective > 0.0) {
            return invalid("beta and the effective dimension must be positive");
        }
        if !(self.c_depth > 0.0) || !(self.c_width > 0.0) {
            return invalid("sizing constants must be positive");
        }
        if self.input_dim == 0 {
            return invalid("input dimension must be positive");
        }
        Ok(())
    }

    /// Returns `(depth, weights)`, with depth at least 2 and weights at least
    /// `input_dim + 1`.
    pub fn size_for(&self) -> Result<(usize, usize)> {
        self.validate()?;
        Ok(self.size_for_real(self.n as f64))
    }

    /// Same rule at a real-valued sample size (useful for the `n = e` corner).
    pub fn size_for_real(&self, n: f64) -> (usize, usize) {
        let ln_n = n.ln();
        let depth = ((self.c_depth * ln_n).ceil() as usize).max(2);
        let weights = (self.c_width * n.powf(self.width_exponent()) * ln_n).ceil() as usize;
        (depth, weights.max(self.input_dim + 1))
    }
}

/// Parameter count of a scalar dense net with `depth - 1` hidden layers of
/// width `h` on `input_dim` inputs (weights and biases).
pub fn parameter_count_for(depth: usize, h: usize, input_dim: usize) -> usize {
    assert!(depth >= 2);
    (input_dim + 1) * h + (depth - 2) * (h + 1) * h + (h + 1)
}

/// Largest equal hidden width whose parameter count stays within `weights`.
pub fn hidden_width_for(depth: usize, weights: usize, input_dim: usize) -> Option<usize> {
    if depth < 2 || parameter_count_for(depth, 1, input_dim) > weights {
        return None;
    }
    let mut h = 1;
    while parameter_count_for(depth, h + 1, input_dim) <= weights {
        h += 1;
    }
    Some(h)
}

/// Randomly initialized trainable network with `depth - 1` hidden layers of
/// equal width using at most `weights` parameters.
pub fn architect<R: Rng + ?Sized>(depth: usize, weights: usize, input_dim: usize, rng: &mut R) -> Result<ReluNet> {
    if depth < 2 {
        return Err(Error::Sizing(format!("depth must be at least 2, got {depth}")));
    }
    if input_dim == 0 {
        return invalid("input dimension must be positive");
    }
    let h = hidden_width_for(depth, weights, input_dim).ok_or_else(|| {
        Error::Sizing(format!(
            "{weights} weights cannot fill {} hidden layers on {input_dim} inputs (need at least {})",
            depth - 1,
            parameter_count_for(depth, 1, input_dim)
        ))
    })?;
    ReluNet::random_dense(input_dim, &vec![h; depth - 1], rng)
}
