use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::net::{FinalActivation, Layer, ReluNet};

/// The trapezoid `ξ_{a,b}`: 1 on `[-b, b]`, 0 outside `(-a, a)`, linear in between.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapezoidUnit {
    pub a: f64,
    pub b: f64,
}

impl TrapezoidUnit {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(b > 0.0 && b < a && a.is_finite()) {
            return invalid(format!("trapezoid needs 0 < b < a, got a = {a}, b = {b}"));
        }
        Ok(Self { a, b })
    }

    /// Closed form `clamp((a - |x|) / (a - b), 0, 1)`.
    pub fn eval(&self, x: f64) -> f64 {
        ((self.a - x.abs()) / (self.a - self.b)).clamp(0.0, 1.0)
    }

    /// `relu((x+a)/(a-b)) - relu((x+b)/(a-b)) - relu((x-b)/(a-b)) + relu((x-a)/(a-b))`
    /// as one hidden layer of four units.
    pub fn to_net(&self) -> ReluNet {
        let s = 1.0 / (self.a - self.b);
        let hidden = Layer::dense(
            4,
            1,
            vec![s; 4],
            vec![self.a * s, self.b * s, -self.b * s, -self.a * s],
        )
        .expect("shapes agree");
        let out = Layer::dense(1, 4, vec![1.0, -1.0, -1.0, 1.0], vec![0.0]).expect("shapes agree");
        ReluNet::new(1, vec![hidden, out], FinalActivation::Identity).expect("shapes agree")
    }
}

/// Network realizing `ξ_{a,b}` with four ReLU units.
pub fn build_trapezoid(a: f64, b: f64) -> Result<ReluNet> {
    Ok(TrapezoidUnit::new(a, b)?.to_net())
}
