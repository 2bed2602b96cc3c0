//! The standard bump `b(x) = exp(1 / (x^2 - 1))` on `|x| < 1`, zero outside,
//! with analytic derivatives up to order two.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Highest derivative order evaluated analytically.
pub const MAX_BUMP_ORDER: usize = 2;

/// Grid size used to bound the sup norms of `b` and its derivatives.
pub const SUP_GRID: usize = 10_000;

/// `[b(x), b'(x), b''(x)]`.
pub fn bump_derivatives(x: f64) -> [f64; 3] {
    if x.abs() >= 1.0 {
        return [0.0; 3];
    }
    let u = x * x - 1.0;
    let b = (1.0 / u).exp();
    if b == 0.0 {
        return [0.0; 3];
    }
    let q1 = -2.0 * x / (u * u);
    let q2 = (6.0 * x * x + 2.0) / (u * u * u);
    [b, q1 * b, (q2 + q1 * q1) * b]
}

/// `b^(order)(x)` for `order <= 2`.
pub fn eval_bump(x: f64, order: usize) -> Result<f64> {
    if order > MAX_BUMP_ORDER {
        return Err(Error::Capability(format!(
            "bump derivatives are implemented up to order {MAX_BUMP_ORDER}, order {order} was requested"
        )));
    }
    Ok(bump_derivatives(x)[order])
}

/// Numerical constants of the bump.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpConstants {
    /// Grid bounds of `sup |b^(r)|` for `r = 0..=3`; the third derivative
    /// is bounded by differencing `b''` on the grid.
    pub sup: [f64; 4],
    /// `∫ b(x)^2 dx` over `[-1, 1]`.
    pub l2_sq: f64,
}

pub fn bump_constants() -> &'static BumpConstants {
    static CONSTS: OnceLock<BumpConstants> = OnceLock::new();
    CONSTS.get_or_init(|| {
        let n = SUP_GRID;
        let h = 2.0 / n as f64;
        let mut sup = [0.0f64; 4];
        let mut prev_b2: Option<f64> = None;
        for i in 0..=n {
            let x = -1.0 + h * i as f64;
            let v = bump_derivatives(x);
            for r in 0..3 {
                sup[r] = sup[r].max(v[r].abs());
            }
            if let Some(p) = prev_b2 {
                sup[3] = sup[3].max(((v[2] - p) / h).abs());
            }
            prev_b2 = Some(v[2]);
        }
        // b is flat to all orders at ±1, so the midpoint rule converges fast.
        let m = 200_000;
        let hm = 2.0 / m as f64;
        let l2_sq = (0..m)
            .map(|i| {
                let b = bump_derivatives(-1.0 + hm * (i as f64 + 0.5))[0];
                b * b
            })
            .sum::<f64>()
            * hm;
        BumpConstants { sup, l2_sq }
    })
}
