//! Ground-truth Hölder functions with exact derivative oracles.

use serde::{Deserialize, Serialize};

use super::bump::{bump_constants, bump_derivatives, MAX_BUMP_ORDER};
use crate::error::{invalid, Error, Result};

/// All multi-indices in `d` variables with total degree at most `k`,
/// ordered by degree and then lexicographically (descending in the first
/// coordinate).
pub fn multi_indices(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for deg in 0..=k {
        let mut cur = vec![0; d];
        fill(&mut cur, 0, deg, &mut out);
    }
    out
}

fn fill(cur: &mut Vec<usize>, pos: usize, left: usize, out: &mut Vec<Vec<usize>>) {
    if pos + 1 == cur.len() {
        cur[pos] = left;
        out.push(cur.clone());
        return;
    }
    for v in (0..=left).rev() {
        cur[pos] = v;
        fill(cur, pos + 1, left - v, out);
    }
}

/// `⌊β⌋`, the highest derivative order in the Hölder norm.
pub fn floor_beta(beta: f64) -> usize {
    beta.floor() as usize
}

/// Hölder-norm bound of a function whose partial derivative along the
/// multi-index `s` is bounded by `sup(s)`.
///
/// The seminorm of order `β - ⌊β⌋ = γ` of `g = ∂^s f` is bounded by
/// `2 sup|g|` when `γ = 0`, and otherwise by `(2 sup|g|)^(1-γ) Lip(g)^γ`
/// with `Lip(g) <= Σ_j sup |∂_j g|`.
pub fn holder_norm_bound(d: usize, beta: f64, sup: impl Fn(&[usize]) -> f64) -> f64 {
    let k = floor_beta(beta);
    let gamma = beta - k as f64;
    let mut total = 0.0;
    for s in multi_indices(d, k) {
        let g = sup(&s);
        total += g;
        if s.iter().sum::<usize>() < k {
            continue;
        }
        total += if gamma == 0.0 {
            2.0 * g
        } else {
            let lip: f64 = (0..d)
                .map(|j| {
                    let mut t = s.clone();
                    t[j] += 1;
                    sup(&t)
                })
                .sum();
            (2.0 * g).powf(1.0 - gamma) * lip.powf(gamma)
        };
    }
    total
}

/// Hölder-norm bound of `x -> Π_j b(x_j)` from grid bounds on `b`.
pub fn bump_product_holder_norm(d: usize, beta: f64) -> Result<f64> {
    let k = floor_beta(beta);
    let sup = &bump_constants().sup;
    if k + 1 >= sup.len() {
        return Err(Error::Capability(format!(
            "bump targets support beta < {}, got {beta}",
            MAX_BUMP_ORDER + 1
        )));
    }
    Ok(holder_norm_bound(d, beta, |s| s.iter().map(|&r| sup[r]).product()))
}

/// Sum of scaled bumps `a r^β Π_j b((x_j - c_j) / r)` with common radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpSum {
    pub d: usize,
    pub beta: f64,
    /// Target Hölder-norm bound.
    pub holder_c: f64,
    /// Amplitude chosen so that `a Π b` has Hölder norm at most `holder_c`.
    pub a: f64,
    pub radius: f64,
    /// Centers, row-major.
    pub centers: Vec<f64>,
}

impl BumpSum {
    pub fn new(d: usize, beta: f64, holder_c: f64, radius: f64, centers: Vec<f64>) -> Result<Self> {
        if d == 0 || !centers.len().is_multiple_of(d) {
            return invalid("bump centers must form rows of the target dimension");
        }
        if !(beta > 0.0) || !(holder_c > 0.0) || !(radius > 0.0 && radius <= 1.0) {
            return invalid(format!("bump parameters out of range: beta={beta}, C={holder_c}, radius={radius}"));
        }
        let a = holder_c / bump_product_holder_norm(d, beta)?;
        Ok(Self { d, beta, holder_c, a, radius, centers })
    }

    /// One bump centered in the cube with radius 1/2.
    pub fn single(d: usize, beta: f64, holder_c: f64) -> Result<Self> {
        Self::new(d, beta, holder_c, 0.5, vec![0.5; d])
    }

    /// The packing member `f_ω` on the grid `[m]^d`: cell `ξ` (row-major,
    /// last coordinate fastest) carries a bump of radius `δ/2` centered at
    /// `(ξ + 1/2) δ` when `ω_ξ = 1`. Cells of side `δ = 1/m` hold disjoint
    /// supports.
    pub fn from_code(m: usize, d: usize, omega: &[bool], beta: f64, holder_c: f64) -> Result<Self> {
        let cells = m.checked_pow(d as u32).unwrap_or(usize::MAX);
        if omega.len() != cells {
            return invalid(format!("omega has length {} but the grid has {cells} cells", omega.len()));
        }
        let delta = 1.0 / m as f64;
        let mut centers = Vec::new();
        for (cell, &on) in omega.iter().enumerate() {
            if !on {
                continue;
            }
            let mut rest = cell;
            let mut c = vec![0.0; d];
            for j in (0..d).rev() {
                c[j] = ((rest % m) as f64 + 0.5) * delta;
                rest /= m;
            }
            centers.extend(c);
        }
        Self::new(d, beta, holder_c, delta / 2.0, centers)
    }

    pub fn bump_count(&self) -> usize {
        self.centers.len() / self.d
    }

    /// `∫ h^2` for one bump over `ℝ^d`.
    pub fn bump_l2_sq(&self) -> f64 {
        let r = self.radius;
        self.a * self.a * r.powf(2.0 * self.beta + self.d as f64) * bump_constants().l2_sq.powi(self.d as i32)
    }

    fn derivative(&self, x: &[f64], s: &[usize]) -> f64 {
        let r = self.radius;
        let order: usize = s.iter().sum();
        let scale = self.a * r.powf(self.beta - order as f64);
        let mut total = 0.0;
        'bumps: for c in self.centers.chunks(self.d) {
            let mut p = scale;
            for j in 0..self.d {
                let u = (x[j] - c[j]) / r;
                if u.abs() >= 1.0 {
                    continue 'bumps;
                }
                p *= bump_derivatives(u)[s[j]];
            }
            total += p;
        }
        total
    }
}

/// Random-sign bumps on nested dyadic grids. Level `j = 1..=levels` puts
/// `± a r^β Π_j b((x_j - c_j) / r)` with `r = 2^-(j+1)` in every cell of side
/// `2^-j`, so each level is a disjoint-support bump sum and the energy at
/// scale `2^-j` decays like `2^(-2jβ)`. Signs are a hash of `(seed, level,
/// cell)` and are not stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiScale {
    pub d: usize,
    pub beta: f64,
    /// Hölder-norm bound of each level.
    pub holder_c: f64,
    pub a: f64,
    pub levels: u32,
    pub seed: u64,
}

impl MultiScale {
    pub const MAX_LEVELS: u32 = 20;

    pub fn new(d: usize, beta: f64, holder_c: f64, levels: u32, seed: u64) -> Result<Self> {
        if d == 0 || levels == 0 || levels > Self::MAX_LEVELS {
            return invalid(format!("multiscale target needs d >= 1 and 1 <= levels <= {}", Self::MAX_LEVELS));
        }
        if !(beta > 0.0) || !(holder_c > 0.0) {
            return invalid(format!("multiscale parameters out of range: beta={beta}, C={holder_c}"));
        }
        let a = holder_c / bump_product_holder_norm(d, beta)?;
        Ok(Self { d, beta, holder_c, a, levels, seed })
    }

    fn sign(&self, level: u32, cell: u64) -> f64 {
        if crate::rng::derive_seed(self.seed, &[level as u64, cell]) & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    fn derivative(&self, x: &[f64], s: &[usize]) -> f64 {
        let order: usize = s.iter().sum();
        let mut total = 0.0;
        'levels: for level in 1..=self.levels {
            let m = (1u64 << level) as f64;
            let r = 0.5 / m;
            let mut p = self.a * r.powf(self.beta - order as f64);
            let mut cell = 0u64;
            for j in 0..self.d {
                let k = (x[j] * m).floor().clamp(0.0, m - 1.0);
                let u = (x[j] - (k + 0.5) / m) / r;
                if u.abs() >= 1.0 {
                    continue 'levels;
                }
                p *= bump_derivatives(u)[s[j]];
                cell = cell * (m as u64) + k as u64;
            }
            total += self.sign(level, cell) * p;
        }
        total
    }
}

/// Additive cubic `A/d Σ_j T(2 x_j - 1)` with `T(t) = 4t^3 - 3t`, bounded
/// by `A` on the cube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothPoly {
    pub d: usize,
    pub amplitude: f64,
}

impl SmoothPoly {
    /// `sup |T^(r)|` on `[-1, 1]`.
    const T_SUP: [f64; 4] = [1.0, 9.0, 24.0, 24.0];

    fn t_deriv(t: f64, r: usize) -> f64 {
        match r {
            0 => 4.0 * t * t * t - 3.0 * t,
            1 => 12.0 * t * t - 3.0,
            2 => 24.0 * t,
            3 => 24.0,
            _ => 0.0,
        }
    }

    fn derivative(&self, x: &[f64], s: &[usize]) -> f64 {
        let w = self.amplitude / self.d as f64;
        let active: Vec<usize> = (0..self.d).filter(|&j| s[j] > 0).collect();
        match active.as_slice() {
            [] => w * x.iter().map(|&v| Self::t_deriv(2.0 * v - 1.0, 0)).sum::<f64>(),
            [j] => w * 2f64.powi(s[*j] as i32) * Self::t_deriv(2.0 * x[*j] - 1.0, s[*j]),
            _ => 0.0,
        }
    }

    fn sup(&self, s: &[usize]) -> f64 {
        let active: Vec<usize> = (0..self.d).filter(|&j| s[j] > 0).collect();
        match active.as_slice() {
            [] => self.amplitude.abs(),
            [j] => {
                let r = s[*j];
                let t = Self::T_SUP.get(r).copied().unwrap_or(0.0);
                self.amplitude.abs() / self.d as f64 * 2f64.powi(r as i32) * t
            }
            _ => 0.0,
        }
    }
}

/// Hölder ground truth `f_0` on `[0,1]^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HolderTarget {
    Constant { d: usize, c: f64 },
    BumpSum(BumpSum),
    SmoothPoly(SmoothPoly),
    MultiScale(MultiScale),
}

impl HolderTarget {
    /// Parses `constant:<c>`, `bump`, `bump-sum:<m>` (all cells on) or
    /// `smooth-poly[:<amplitude>]` or `multiscale:<levels>[:<seed>]`.
    pub fn parse(text: &str, d: usize, beta: f64, holder_c: f64) -> Result<Self> {
        let (kind, arg) = match text.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (text, None),
        };
        let number = |default: Option<f64>| -> Result<f64> {
            match (arg, default) {
                (Some(a), _) => a.trim().parse::<f64>().map_err(|_| {
                    Error::InvalidInput(format!("target '{text}': '{a}' is not a number"))
                }),
                (None, Some(v)) => Ok(v),
                (None, None) => invalid(format!("target '{text}' needs a parameter, e.g. {kind}:1")),
            }
        };
        if d == 0 {
            return invalid("target dimension must be positive");
        }
        match kind.trim().to_ascii_lowercase().as_str() {
            "constant" => Ok(Self::Constant { d, c: number(Some(0.0))? }),
            "bump" => Ok(Self::BumpSum(BumpSum::single(d, beta, holder_c)?)),
            "bump-sum" => {
                let m = number(None)?;
                if m < 1.0 || m.fract() != 0.0 {
                    return invalid(format!("target '{text}': grid size must be a positive integer"));
                }
                let cells = (m as usize).pow(d as u32);
                Ok(Self::BumpSum(BumpSum::from_code(m as usize, d, &vec![true; cells], beta, holder_c)?))
            }
            "smooth-poly" => Ok(Self::SmoothPoly(SmoothPoly { d, amplitude: number(Some(1.0))? })),
            "multiscale" => {
                let parts: Vec<&str> = arg.unwrap_or("").split(':').collect();
                let bad = || Error::InvalidInput(format!("target '{text}': expected multiscale:<levels>[:<seed>]"));
                let levels = parts[0].trim().parse::<u32>().map_err(|_| bad())?;
                let seed = match parts.get(1) {
                    Some(v) => v.trim().parse::<u64>().map_err(|_| bad())?,
                    None => 0,
                };
                if parts.len() > 2 {
                    return Err(bad());
                }
                Ok(Self::MultiScale(MultiScale::new(d, beta, holder_c, levels, seed)?))
            }
            _ => invalid(format!(
                "unknown target '{text}' (expected constant:<c>, bump, bump-sum:<m>, smooth-poly[:<a>], multiscale:<levels>[:<seed>])"
            )),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Constant { d, .. } => *d,
            Self::BumpSum(b) => b.d,
            Self::SmoothPoly(p) => p.d,
            Self::MultiScale(t) => t.d,
        }
    }

    /// Highest derivative order the oracle provides.
    pub fn max_derivative_order(&self) -> usize {
        match self {
            Self::Constant { .. } => usize::MAX,
            Self::BumpSum(_) => MAX_BUMP_ORDER,
            Self::SmoothPoly(_) => usize::MAX,
            Self::MultiScale(_) => MAX_BUMP_ORDER,
        }
    }

    /// A bound on `‖f‖_{H^β}` over the unit cube.
    pub fn holder_norm(&self, beta: f64) -> Result<f64> {
        Ok(match self {
            // derivatives and increments of a constant vanish
            Self::Constant { c, .. } => c.abs(),
            Self::BumpSum(b) => b.a * bump_product_holder_norm(b.d, beta)?,
            Self::SmoothPoly(p) => holder_norm_bound(p.d, beta, |s| p.sup(s)),
            // triangle inequality over the levels
            Self::MultiScale(t) => t.levels as f64 * t.a * bump_product_holder_norm(t.d, beta)?,
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::Constant { c, .. } => *c,
            Self::BumpSum(b) => b.derivative(x, &vec![0; b.d]),
            Self::SmoothPoly(p) => p.derivative(x, &vec![0; p.d]),
            Self::MultiScale(t) => t.derivative(x, &vec![0; t.d]),
        }
    }

    /// Exact partial derivative `∂^s f(x)`.
    pub fn derivative(&self, x: &[f64], s: &[usize]) -> Result<f64> {
        let d = self.dim();
        if x.len() != d || s.len() != d {
            return invalid(format!("derivative needs a point and multi-index of length {d}"));
        }
        let order: usize = s.iter().sum();
        if s.iter().any(|&r| r > self.max_derivative_order()) {
            return Err(Error::Capability(format!(
                "target provides derivatives up to order {} per coordinate, multi-index {s:?} was requested",
                self.max_derivative_order()
            )));
        }
        Ok(match self {
            Self::Constant { c, .. } => {
                if order == 0 {
                    *c
                } else {
                    0.0
                }
            }
            Self::BumpSum(b) => b.derivative(x, s),
            Self::SmoothPoly(p) => p.derivative(x, s),
            Self::MultiScale(t) => t.derivative(x, s),
        })
    }

    /// Short descriptor for reports.
    pub fn describe(&self) -> String {
        match self {
            Self::Constant { c, .. } => format!("constant:{c}"),
            Self::BumpSum(b) => format!("bump-sum({} bumps, radius {}, a {:.6e})", b.bump_count(), b.radius, b.a),
            Self::SmoothPoly(p) => format!("smooth-poly:{}", p.amplitude),
            Self::MultiScale(t) => format!("multiscale:{}:{}", t.levels, t.seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn multi_index_counts() {
        for d in 1..5 {
            for k in 0..4 {
                let all = multi_indices(d, k);
                assert_eq!(all.len(), binom(d + k, k));
                assert!(all.iter().all(|s| s.iter().sum::<usize>() <= k));
            }
        }
        assert_eq!(multi_indices(2, 1), vec![vec![0, 0], vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn bump_derivatives_match_differences() {
        let t = HolderTarget::BumpSum(BumpSum::new(2, 2.0, 1.0, 0.4, vec![0.5, 0.45]).unwrap());
        let x = [0.6, 0.3];
        let h = 1e-5;
        for j in 0..2 {
            let mut p = x;
            let mut q = x;
            p[j] += h;
            q[j] -= h;
            let mut e = [0, 0];
            e[j] = 1;
            let fd = (t.eval(&p) - t.eval(&q)) / (2.0 * h);
            assert!((t.derivative(&x, &e).unwrap() - fd).abs() < 1e-8);
            let mut e2 = [0, 0];
            e2[j] = 2;
            let fd2 = (t.derivative(&p, &e).unwrap() - t.derivative(&q, &e).unwrap()) / (2.0 * h);
            assert!((t.derivative(&x, &e2).unwrap() - fd2).abs() < 1e-7);
        }
        let fdm = (t.derivative(&[0.6 + h, 0.3], &[0, 1]).unwrap() - t.derivative(&[0.6 - h, 0.3], &[0, 1]).unwrap())
            / (2.0 * h);
        assert!((t.derivative(&x, &[1, 1]).unwrap() - fdm).abs() < 1e-7);
        assert!(matches!(t.derivative(&x, &[3, 0]), Err(Error::Capability(_))));
    }

    #[test]
    fn code_bumps_vanish_on_cell_boundaries() {
        let omega = vec![true; 16];
        let t = HolderTarget::BumpSum(BumpSum::from_code(4, 2, &omega, 1.5, 1.0).unwrap());
        for i in 0..=4 {
            for k in 0..=40 {
                let x = [i as f64 / 4.0, k as f64 / 40.0];
                for s in multi_indices(2, 2) {
                    assert_eq!(t.derivative(&x, &s).unwrap(), 0.0);
                    let y = [x[1], x[0]];
                    assert_eq!(t.derivative(&y, &s).unwrap(), 0.0);
                }
            }
        }
    }

    #[test]
    fn bump_amplitude_meets_holder_bound() {
        for &(d, beta) in &[(1, 1.0), (2, 2.0), (1, 0.5), (3, 1.5), (1, 2.5)] {
            let b = BumpSum::single(d, beta, 2.0).unwrap();
            let norm = b.a * bump_product_holder_norm(d, beta).unwrap();
            assert!((norm - 2.0).abs() < 1e-12);
        }
        assert!(matches!(BumpSum::single(1, 3.0, 1.0), Err(Error::Capability(_))));
    }

    #[test]
    fn smooth_poly_derivatives() {
        let t = HolderTarget::SmoothPoly(SmoothPoly { d: 2, amplitude: 1.0 });
        assert!((t.eval(&[1.0, 1.0]) - 1.0).abs() < 1e-15);
        assert!((t.eval(&[0.5, 0.5])).abs() < 1e-15);
        let h = 1e-6;
        let x = [0.3, 0.8];
        let fd = (t.eval(&[0.3 + h, 0.8]) - t.eval(&[0.3 - h, 0.8])) / (2.0 * h);
        assert!((t.derivative(&x, &[1, 0]).unwrap() - fd).abs() < 1e-7);
        assert_eq!(t.derivative(&x, &[1, 1]).unwrap(), 0.0);
        assert!(t.holder_norm(1.0).unwrap() >= 1.0 + 18.0);
    }

    #[test]
    fn parse_targets() {
        assert_eq!(HolderTarget::parse("constant:0", 2, 1.0, 1.0).unwrap(), HolderTarget::Constant { d: 2, c: 0.0 });
        assert!(matches!(HolderTarget::parse("bump", 1, 1.0, 1.0).unwrap(), HolderTarget::BumpSum(_)));
        match HolderTarget::parse("bump-sum:3", 2, 1.0, 1.0).unwrap() {
            HolderTarget::BumpSum(b) => assert_eq!(b.bump_count(), 9),
            other => panic!("{other:?}"),
        }
        assert!(HolderTarget::parse("constant:x", 1, 1.0, 1.0).is_err());
        assert!(HolderTarget::parse("wave", 1, 1.0, 1.0).is_err());
        assert!(HolderTarget::parse("bump-sum", 1, 1.0, 1.0).is_err());
    }

    #[test]
    fn multiscale_derivatives_match_differences() {
        let t = HolderTarget::parse("multiscale:4:7", 2, 2.0, 3.0).unwrap();
        let h = 1e-6;
        for x in [[0.31, 0.47], [0.12, 0.83], [0.66, 0.29]] {
            let fx = |v: [f64; 2]| t.eval(&v);
            let d0 = (fx([x[0] + h, x[1]]) - fx([x[0] - h, x[1]])) / (2.0 * h);
            assert!((t.derivative(&x, &[1, 0]).unwrap() - d0).abs() < 1e-5);
            let g = |v: [f64; 2]| t.derivative(&v, &[0, 1]).unwrap();
            let d11 = (g([x[0] + h, x[1]]) - g([x[0] - h, x[1]])) / (2.0 * h);
            assert!((t.derivative(&x, &[1, 1]).unwrap() - d11).abs() < 1e-3 * (1.0 + d11.abs()));
        }
    }

    #[test]
    fn multiscale_vanishes_on_the_coarsest_grid() {
        let t = HolderTarget::parse("multiscale:5", 1, 1.0, 1.0).unwrap();
        // every level has a cell boundary at 0, 1/2 and 1
        for x in [0.0, 0.5, 1.0] {
            assert_eq!(t.eval(&[x]), 0.0);
        }
        assert_eq!(t.holder_norm(1.0).unwrap(), 5.0);
        assert_eq!(t.describe(), "multiscale:5:0");
        assert!(HolderTarget::parse("multiscale:0", 1, 1.0, 1.0).is_err());
        assert!(HolderTarget::parse("multiscale:2:x", 1, 1.0, 1.0).is_err());
    }
}
