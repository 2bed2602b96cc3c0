use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Distribution of the explanatory variable on `[0,1]^d`.
///
/// The manifold kinds push a uniform parameter through a fixed smooth
/// embedding, so their intrinsic dimension is known by construction:
///
/// * `curve`: `t ~ U[0,1]`, `x_0 = 0.05 + 0.9 t` and
///   `x_j = 0.5 + 0.45 sin(pi (j + 1) t + j)` for `j >= 1`.
/// * `sheet`: `(s, t) ~ U[0,1]^2`, `x_0 = 0.05 + 0.9 s`, `x_1 = 0.05 + 0.9 t`
///   and `x_j = 0.5 + 0.45 sin(pi j s + pi t + j)` for `j >= 2`.
/// * `cantor`: middle-thirds Cantor measure on `[0,1]`, realized by `levels`
///   random ternary digits in `{0, 2}` followed by a uniform offset inside
///   the final interval of length `3^-levels`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LambdaSpec {
    Uniform { d: usize },
    Curve { d: usize },
    Sheet { d: usize },
    Cantor { levels: u32 },
}

impl LambdaSpec {
    /// Builds a spec from its name and the ambient dimension (ignored for
    /// `cantor`, which is one-dimensional).
    pub fn from_name(kind: &str, d: usize, levels: u32) -> Result<Self> {
        let spec = match kind.to_ascii_lowercase().as_str() {
            "uniform" => Self::Uniform { d },
            "curve" | "manifold-curve" => Self::Curve { d },
            "sheet" | "manifold-sheet" => Self::Sheet { d },
            "cantor" => Self::Cantor { levels },
            _ => return invalid(format!("unknown lambda '{kind}' (expected uniform, curve, sheet or cantor)")),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Uniform { d } | Self::Curve { d } if d == 0 => invalid("lambda dimension must be positive"),
            Self::Sheet { d } if d < 2 => invalid("a sheet needs ambient dimension at least 2"),
            Self::Cantor { levels } if levels == 0 || levels > 30 => invalid("cantor levels must lie in 1..=30"),
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Self::Uniform { d } | Self::Curve { d } | Self::Sheet { d } => d,
            Self::Cantor { .. } => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Uniform { .. } => "uniform",
            Self::Curve { .. } => "curve",
            Self::Sheet { .. } => "sheet",
            Self::Cantor { .. } => "cantor",
        }
    }

    /// Dimension of the support by construction.
    pub fn intrinsic_dim(&self) -> f64 {
        match *self {
            Self::Uniform { d } => d as f64,
            Self::Curve { d } => d.min(1) as f64,
            Self::Sheet { .. } => 2.0,
            Self::Cantor { .. } => 2f64.ln() / 3f64.ln(),
        }
    }

    /// Writes one sample into `out` (length `dim()`).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match *self {
            Self::Uniform { .. } => out.iter_mut().for_each(|v| *v = rng.random()),
            Self::Curve { .. } => curve_point(rng.random(), out),
            Self::Sheet { .. } => sheet_point(rng.random(), rng.random(), out),
            Self::Cantor { levels } => {
                let mut x = 0.0;
                let mut scale = 1.0;
                for _ in 0..levels {
                    scale /= 3.0;
                    if rng.random::<bool>() {
                        x += 2.0 * scale;
                    }
                }
                out[0] = x + scale * rng.random::<f64>();
            }
        }
        assert!(out.iter().all(|v| (0.0..=1.0).contains(v)), "sample left the unit cube: {out:?}");
    }
}

pub(crate) fn curve_point(t: f64, out: &mut [f64]) {
    out[0] = 0.05 + 0.9 * t;
    for (j, v) in out.iter_mut().enumerate().skip(1) {
        *v = 0.5 + 0.45 * (PI * (j + 1) as f64 * t + j as f64).sin();
    }
}

pub(crate) fn sheet_point(s: f64, t: f64, out: &mut [f64]) {
    out[0] = 0.05 + 0.9 * s;
    out[1] = 0.05 + 0.9 * t;
    for (j, v) in out.iter_mut().enumerate().skip(2) {
        *v = 0.5 + 0.45 * (PI * j as f64 * s + PI * t + j as f64).sin();
    }
}

/// `n` i.i.d. samples, row-major.
pub fn sample_lambda<R: Rng + ?Sized>(spec: &LambdaSpec, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    spec.validate()?;
    let d = spec.dim();
    let mut xs = vec![0.0; n * d];
    for row in xs.chunks_mut(d) {
        spec.sample_into(rng, row);
    }
    Ok(xs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn samples_stay_in_cube() {
        let mut rng = seeded(1);
        for spec in [
            LambdaSpec::Uniform { d: 3 },
            LambdaSpec::Curve { d: 4 },
            LambdaSpec::Sheet { d: 3 },
            LambdaSpec::Cantor { levels: 12 },
        ] {
            let xs = sample_lambda(&spec, 2000, &mut rng).unwrap();
            assert_eq!(xs.len(), 2000 * spec.dim());
            assert!(xs.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn cantor_samples_avoid_middle_thirds() {
        let mut rng = seeded(2);
        let xs = sample_lambda(&LambdaSpec::Cantor { levels: 8 }, 5000, &mut rng).unwrap();
        for x in xs {
            // the first two ternary digits are never 1
            let d1 = (x * 3.0).floor() as u32;
            let d2 = ((x * 9.0).floor() as u32) % 3;
            assert_ne!(d1, 1);
            assert_ne!(d2, 1);
        }
    }

    #[test]
    fn names_and_validation() {
        assert_eq!(LambdaSpec::from_name("curve", 3, 0).unwrap(), LambdaSpec::Curve { d: 3 });
        assert!(LambdaSpec::from_name("torus", 3, 0).is_err());
        assert!(LambdaSpec::from_name("sheet", 1, 0).is_err());
        assert!(LambdaSpec::from_name("uniform", 0, 0).is_err());
        assert_eq!(LambdaSpec::Cantor { levels: 5 }.dim(), 1);
    }
}
