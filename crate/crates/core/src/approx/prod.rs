//! Approximate products of values in `[-1, 1]` with ReLU networks.
//!
//! `x y = s((x+y)/2) - s((x-y)/2)` where `s(v)` is the piecewise-linear
//! interpolant of `v^2` on the dyadic grid of `|v|` with `2^S` pieces,
//! built from `S` compositions of the hat function. Both interpolants
//! overestimate by at most `2^(-2S-2)`, so one pairwise product errs by at
//! most that much. `k` factors are multiplied in a balanced binary tree;
//! errors add up over the `k - 1` pairwise nodes.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::net::build::{affine, compose, identity_carry, parallel};
use crate::net::{FinalActivation, Layer, ReluNet};

/// Approximate product of `arity` inputs with sup error at most `2^-m` on `[-1, 1]^arity`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProdNet {
    pub arity: usize,
    pub m: u32,
    /// Hat compositions per squaring unit.
    pub stages: u32,
    pub net: ReluNet,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProdShape {
    pub depth: usize,
    pub weights: usize,
}

/// Smallest admissible accuracy `½ (log2(4k) - 1)` for `k` factors.
pub fn min_accuracy(arity: usize) -> f64 {
    0.5 * ((4.0 * arity as f64).log2() - 1.0)
}

/// Stages `S` such that `(k - 1) 2^(-2S-2) <= 2^-m`.
pub fn stages_for(arity: usize, m: u32) -> u32 {
    if arity < 2 {
        return 0;
    }
    let need = (m as f64 + ((arity - 1) as f64).log2() - 2.0) / 2.0;
    (need.ceil().max(1.0)) as u32
}

/// `v -> s(v)` for `|v| <= 1`; depth `stages + 2`.
pub fn square_net(stages: u32) -> ReluNet {
    assert!(stages >= 1);
    let mut layers = vec![Layer::dense(2, 1, vec![1.0, -1.0], vec![0.0; 2]).expect("shape")];
    // stage 1 reads t = |v| = relu(v) + relu(-v) and starts the running value at t
    layers.push(Layer::dense(3, 2, vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0], vec![0.0, -0.5, 0.0]).expect("shape"));
    for s in 2..=stages {
        let q = 0.25f64.powi(s as i32 - 1);
        let w = vec![2.0, -4.0, 0.0, 2.0, -4.0, 0.0, -2.0 * q, 4.0 * q, 1.0];
        layers.push(Layer::dense(3, 3, w, vec![0.0, -0.5, 0.0]).expect("shape"));
    }
    let q = 0.25f64.powi(stages as i32);
    layers.push(Layer::dense(1, 3, vec![-2.0 * q, 4.0 * q, 1.0], vec![0.0]).expect("shape"));
    ReluNet::new(1, layers, FinalActivation::Identity).expect("shapes agree")
}

/// `(x, y) -> s((x+y)/2) - s((x-y)/2)`; depth `stages + 2`.
pub fn pair_net(stages: u32) -> ReluNet {
    let sq = square_net(stages);
    let both = parallel(&[sq.clone(), sq], false).expect("equal depth");
    let split = affine(2, 2, vec![(0, 0, 0.5), (0, 1, 0.5), (1, 0, 0.5), (1, 1, -0.5)], vec![0.0; 2]).expect("shape");
    let diff = affine(1, 2, vec![(0, 0, 1.0), (0, 1, -1.0)], vec![0.0]).expect("shape");
    compose(&diff, &compose(&both, &split).expect("dims")).expect("dims")
}

/// Product network for `arity` factors with accuracy `2^-m`.
pub fn build_prod(arity: usize, m: u32) -> Result<ProdNet> {
    if arity == 0 {
        return invalid("a product needs at least one factor");
    }
    if (m as f64) < min_accuracy(arity) {
        return invalid(format!(
            "accuracy m = {m} is below the minimum {:.3} for {arity} factors",
            min_accuracy(arity)
        ));
    }
    if arity == 1 {
        return Ok(ProdNet { arity, m, stages: 0, net: identity_carry(1, 1)? });
    }
    let stages = stages_for(arity, m);
    let level_depth = stages as usize + 2;
    let pair = pair_net(stages);
    let carry = identity_carry(1, level_depth)?;

    let mut net: Option<ReluNet> = None;
    let mut width = arity;
    while width > 1 {
        let mut parts = vec![pair.clone(); width / 2];
        if width % 2 == 1 {
            parts.push(carry.clone());
        }
        let level = parallel(&parts, false)?;
        net = Some(match net {
            None => level,
            Some(prev) => compose(&level, &prev)?,
        });
        width = width.div_ceil(2);
    }
    Ok(ProdNet { arity, m, stages, net: net.expect("arity >= 2") })
}

impl ProdNet {
    pub fn shape(&self) -> ProdShape {
        ProdShape { depth: self.net.depth(), weights: self.net.weight_count() }
    }

    /// Guaranteed sup error on `[-1, 1]^arity`.
    pub fn error_bound(&self) -> f64 {
        if self.arity < 2 {
            return 0.0;
        }
        (self.arity - 1) as f64 * 0.25f64.powi(self.stages as i32 + 1)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.net.forward(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_interpolates_on_grid() {
        for stages in 1..6 {
            let net = square_net(stages);
            let pieces = 1u32 << stages;
            for i in 0..=pieces {
                let t = i as f64 / pieces as f64;
                assert!((net.forward(&[t]).unwrap() - t * t).abs() < 1e-14);
                assert!((net.forward(&[-t]).unwrap() - t * t).abs() < 1e-14);
            }
            let bound = 0.25f64.powi(stages as i32 + 1);
            for i in 0..=1000 {
                let t = -1.0 + i as f64 / 500.0;
                let e = net.forward(&[t]).unwrap() - t * t;
                assert!(e >= -1e-15 && e <= bound + 1e-15, "stages={stages} t={t} e={e}");
            }
        }
    }

    #[test]
    fn examples() {
        for &m in &[4, 8, 12] {
            let p = build_prod(2, m).unwrap();
            assert!((p.eval(&[1.0, 1.0]).unwrap() - 1.0).abs() <= 0.5f64.powi(m as i32));
            let p3 = build_prod(3, m).unwrap();
            assert!((p3.eval(&[0.5, 0.5, 0.5]).unwrap() - 0.125).abs() <= 0.5f64.powi(m as i32));
            let p5 = build_prod(5, m).unwrap();
            assert!(p5.eval(&[0.3, -0.9, 0.0, 0.7, 1.0]).unwrap().abs() <= 0.5f64.powi(m as i32));
        }
    }

    #[test]
    fn zero_factor_gives_exact_zero_at_first_level() {
        let p = build_prod(2, 10).unwrap();
        for &y in &[-1.0, -0.3, 0.0, 0.77, 1.0, 25.0] {
            assert_eq!(p.eval(&[0.0, y]).unwrap(), 0.0);
        }
    }

    #[test]
    fn precondition_and_identity() {
        assert!(build_prod(5, 1).is_err());
        assert!(build_prod(0, 4).is_err());
        let id = build_prod(1, 1).unwrap();
        assert_eq!(id.eval(&[-0.4]).unwrap(), -0.4);
    }

    #[test]
    fn stages_meet_the_error_target() {
        for k in 2..8 {
            for m in 2..16 {
                let s = stages_for(k, m);
                assert!((k - 1) as f64 * 0.25f64.powi(s as i32 + 1) <= 0.5f64.powi(m as i32) * (1.0 + 1e-12));
            }
        }
    }
}
