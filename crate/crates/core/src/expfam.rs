//! One-parameter exponential families in canonical form.
//!
//! A family is described by its log-partition `psi` on natural parameters and
//! the convex conjugate `phi` on means. The canonical link is `mean = psi'`
//! and its inverse is `phi'`. Every family induces the Bregman divergence of
//! `phi`, which is the per-sample training loss.
//!
//! Bernoulli means are clipped to `[1e-3, 1 - 1e-3]` and Poisson natural
//! parameters to `[-5, 5]` so that the curvature of `psi` is bounded above and
//! below on the working domain.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Clip level for Bernoulli means.
pub const BERNOULLI_MEAN_CLIP: f64 = 1e-3;
/// Clip level for Poisson natural parameters.
pub const POISSON_THETA_CLIP: f64 = 5.0;

const DOMAIN_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    /// Normal with unit variance; the natural parameter is the mean.
    Gaussian,
    Bernoulli,
    Poisson,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 3] = [FamilyKind::Gaussian, FamilyKind::Bernoulli, FamilyKind::Poisson];

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Gaussian => "gaussian",
            FamilyKind::Bernoulli => "bernoulli",
            FamilyKind::Poisson => "poisson",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(FamilyKind::Gaussian),
            "bernoulli" => Ok(FamilyKind::Bernoulli),
            "poisson" => Ok(FamilyKind::Poisson),
            other => invalid(format!(
                "unknown family '{other}' (expected gaussian, bernoulli or poisson)"
            )),
        }
    }
}

/// Closed interval, possibly unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL: Interval = Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY };

    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    /// Membership with a small relative slack so that images of boundary
    /// points under the link (e.g. `sigmoid(logit(eps))`) are accepted.
    pub fn contains(&self, x: f64) -> bool {
        if x.is_nan() {
            return false;
        }
        let slack_lo = DOMAIN_SLACK * self.lo.abs().max(1.0);
        let slack_hi = DOMAIN_SLACK * self.hi.abs().max(1.0);
        x >= self.lo - slack_lo && x <= self.hi + slack_hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.max(self.lo).min(self.hi)
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

/// A canonical exponential family with its curvature constants on the
/// (clipped) working domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpFamily {
    pub kind: FamilyKind,
    /// Upper bound on `psi''` over `theta_domain`.
    pub sigma1: f64,
    /// Lower bound on `psi''` over `theta_domain`.
    pub sigma2: f64,
    pub theta_domain: Interval,
    pub mean_domain: Interval,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `x ln(x/y) - x + y` for `x >= 0, y > 0`, accurate when `x` is close to `y`.
fn poisson_divergence(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        return y;
    }
    let u = (x - y) / y;
    y * ((1.0 + u) * u.ln_1p() - u)
}

/// `x ln(x/y)` pieces of the Bernoulli divergence, accurate near `x = y`.
fn bernoulli_divergence(x: f64, y: f64) -> f64 {
    let part = |p: f64, q: f64| -> f64 {
        if p == 0.0 {
            0.0
        } else {
            p * ((p - q) / q).ln_1p()
        }
    };
    let d = part(x, y) + part(1.0 - x, 1.0 - y);
    d.max(0.0)
}

impl ExpFamily {
    pub fn new(kind: FamilyKind) -> Self {
        match kind {
            FamilyKind::Gaussian => ExpFamily {
                kind,
                sigma1: 1.0,
                sigma2: 1.0,
                theta_domain: Interval::REAL,
                mean_domain: Interval::REAL,
            },
            FamilyKind::Bernoulli => {
                let eps = BERNOULLI_MEAN_CLIP;
                let t = ((1.0 - eps) / eps).ln();
                ExpFamily {
                    kind,
                    // psi'' = mu(1 - mu) peaks at theta = 0 and is smallest at the clip edge.
                    sigma1: 0.25,
                    sigma2: eps * (1.0 - eps),
                    theta_domain: Interval::new(-t, t),
                    mean_domain: Interval::new(eps, 1.0 - eps),
                }
            }
            FamilyKind::Poisson => {
                let t = POISSON_THETA_CLIP;
                ExpFamily {
                    kind,
                    sigma1: t.exp(),
                    sigma2: (-t).exp(),
                    theta_domain: Interval::new(-t, t),
                    mean_domain: Interval::new((-t).exp(), t.exp()),
                }
            }
        }
    }

    pub fn gaussian() -> Self {
        Self::new(FamilyKind::Gaussian)
    }

    pub fn bernoulli() -> Self {
        Self::new(FamilyKind::Bernoulli)
    }

    pub fn poisson() -> Self {
        Self::new(FamilyKind::Poisson)
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(Self::new(name.parse()?))
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// `1 / sigma1`: strong-convexity constant of `phi`.
    pub fn tau1(&self) -> f64 {
        1.0 / self.sigma1
    }

    /// `1 / sigma2`: smoothness constant of `phi`.
    pub fn tau2(&self) -> f64 {
        1.0 / self.sigma2
    }

    /// Log-partition function.
    pub fn psi(&self, theta: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => 0.5 * theta * theta,
            FamilyKind::Bernoulli => softplus(theta),
            FamilyKind::Poisson => theta.exp(),
        }
    }

    /// Canonical link: the mean `psi'(theta)`.
    pub fn grad_psi(&self, theta: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => theta,
            FamilyKind::Bernoulli => sigmoid(theta),
            FamilyKind::Poisson => theta.exp(),
        }
    }

    /// Alias of [`ExpFamily::grad_psi`].
    pub fn mean(&self, theta: f64) -> f64 {
        self.grad_psi(theta)
    }

    pub fn psi_second(&self, theta: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => 1.0,
            FamilyKind::Bernoulli => {
                let m = sigmoid(theta);
                m * (1.0 - m)
            }
            FamilyKind::Poisson => theta.exp(),
        }
    }

    /// Convex conjugate of `psi`, extended continuously to the closure of the
    /// mean domain (`0 ln 0 = 0`).
    pub fn phi(&self, m: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => 0.5 * m * m,
            FamilyKind::Bernoulli => xlogx(m) + xlogx(1.0 - m),
            FamilyKind::Poisson => xlogx(m) - m,
        }
    }

    /// Inverse link `phi'(m)`.
    pub fn grad_phi(&self, m: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => m,
            FamilyKind::Bernoulli => (m / (1.0 - m)).ln(),
            FamilyKind::Poisson => m.ln(),
        }
    }

    /// Closure of the set of values a response may take.
    pub fn response_domain(&self) -> Interval {
        match self.kind {
            FamilyKind::Gaussian => Interval::REAL,
            FamilyKind::Bernoulli => Interval::new(0.0, 1.0),
            FamilyKind::Poisson => Interval::new(0.0, f64::INFINITY),
        }
    }

    pub fn clip_mean(&self, m: f64) -> f64 {
        self.mean_domain.clamp(m)
    }

    pub fn clip_natural(&self, theta: f64) -> f64 {
        self.theta_domain.clamp(theta)
    }

    fn check_response(&self, name: &str, y: f64) -> Result<()> {
        if !y.is_finite() || !self.response_domain().contains(y) {
            return invalid(format!(
                "{name} = {y} is outside the {} response domain [{}, {}]",
                self.kind,
                self.response_domain().lo,
                self.response_domain().hi
            ));
        }
        Ok(())
    }

    fn check_mean(&self, name: &str, m: f64) -> Result<()> {
        if !m.is_finite() || !self.mean_domain.contains(m) {
            return invalid(format!(
                "{name} = {m} is outside the {} mean domain [{}, {}]",
                self.kind, self.mean_domain.lo, self.mean_domain.hi
            ));
        }
        Ok(())
    }

    fn check_natural(&self, name: &str, theta: f64) -> Result<()> {
        if !theta.is_finite() || !self.theta_domain.contains(theta) {
            return invalid(format!(
                "{name} = {theta} is outside the {} natural domain [{}, {}]",
                self.kind, self.theta_domain.lo, self.theta_domain.hi
            ));
        }
        Ok(())
    }

    /// Bregman divergence `phi(x) - phi(y) - phi'(y) (x - y)`.
    ///
    /// `x` may be any observable response (the closure of the mean domain);
    /// `y` must lie in the clipped mean domain since `phi'(y)` is needed.
    /// Evaluated in closed forms that stay accurate for `x` close to `y`.
    pub fn bregman(&self, x: f64, y: f64) -> Result<f64> {
        self.check_response("x", x)?;
        self.check_mean("y", y)?;
        Ok(match self.kind {
            FamilyKind::Gaussian => 0.5 * (x - y) * (x - y),
            FamilyKind::Bernoulli => bernoulli_divergence(x, y),
            FamilyKind::Poisson => poisson_divergence(x, y).max(0.0),
        })
    }

    /// One summand of the empirical Bregman risk written in natural
    /// coordinates: `psi(eta) - y eta + phi(y)`, which equals
    /// `bregman(y, mean(eta))`.
    pub fn loss_natural(&self, y: f64, eta: f64) -> Result<f64> {
        self.check_response("y", y)?;
        self.check_natural("eta", eta)?;
        Ok(self.loss_natural_unchecked(y, eta))
    }

    #[inline]
    pub(crate) fn loss_natural_unchecked(&self, y: f64, eta: f64) -> f64 {
        self.psi(eta) - y * eta + self.phi(y)
    }

    /// Derivative of [`ExpFamily::loss_natural`] in `eta`: `mean(eta) - y`.
    pub fn loss_grad_natural(&self, y: f64, eta: f64) -> Result<f64> {
        self.check_response("y", y)?;
        self.check_natural("eta", eta)?;
        Ok(self.grad_psi(eta) - y)
    }

    /// Negative log-likelihood of a response under natural parameter `eta`,
    /// evaluated from the density itself (including its base measure).
    pub fn neg_log_likelihood(&self, y: f64, eta: f64) -> Result<f64> {
        self.check_response("y", y)?;
        self.check_natural("eta", eta)?;
        match self.kind {
            FamilyKind::Gaussian => Ok(0.5 * (y - eta) * (y - eta) + 0.5 * (2.0 * PI).ln()),
            FamilyKind::Bernoulli => {
                // -[y ln p + (1 - y) ln(1 - p)] with p = sigmoid(eta)
                Ok(y * softplus(-eta) + (1.0 - y) * softplus(eta))
            }
            FamilyKind::Poisson => {
                if y.fract() != 0.0 {
                    return invalid(format!("Poisson response y = {y} is not a count"));
                }
                let rate = eta.exp();
                let log_factorial: f64 = (2..=(y as u64)).map(|k| (k as f64).ln()).sum();
                Ok(rate - y * rate.ln() + log_factorial)
            }
        }
    }

    /// Draws one response with natural parameter `eta`, clamped to the
    /// natural domain first.
    pub fn sample_response<R: Rng + ?Sized>(&self, eta: f64, rng: &mut R) -> f64 {
        let eta = self.clip_natural(eta);
        match self.kind {
            FamilyKind::Gaussian => {
                let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(rng);
                eta + z
            }
            FamilyKind::Bernoulli => {
                if rng.random::<f64>() < sigmoid(eta) {
                    1.0
                } else {
                    0.0
                }
            }
            FamilyKind::Poisson => Poisson::new(eta.exp()).expect("positive rate").sample(rng),
        }
    }

    /// KL divergence between the members with natural parameters `theta` and
    /// `theta2`, computed as `bregman(mean(theta), mean(theta2))`.
    pub fn kl(&self, theta: f64, theta2: f64) -> Result<f64> {
        self.check_natural("theta", theta)?;
        self.check_natural("theta2", theta2)?;
        let m1 = self.mean_domain.clamp(self.grad_psi(theta));
        let m2 = self.mean_domain.clamp(self.grad_psi(theta2));
        self.bregman(m1, m2)
    }
}
