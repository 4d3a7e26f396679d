//! Loss functions `ℓ` for shortfall risk and their convex conjugates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::golden_max;

/// Points on the grid used by the numeric conjugate.
pub const CONJUGATE_GRID: usize = 4097;

/// A piecewise-linear convex nondecreasing loss given by knots, extended
/// linearly beyond the first and last knot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKnots", into = "RawKnots")]
pub struct KnotLoss {
    xs: Vec<f64>,
    ys: Vec<f64>,
    left_limit: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKnots {
    knots: Vec<[f64; 2]>,
    #[serde(with = "crate::ext::serde_f64_field")]
    left_limit: f64,
}

impl TryFrom<RawKnots> for KnotLoss {
    type Error = Error;
    fn try_from(r: RawKnots) -> Result<Self> {
        KnotLoss::new(r.knots.iter().map(|k| k[0]).collect(), r.knots.iter().map(|k| k[1]).collect(), r.left_limit)
    }
}

impl From<KnotLoss> for RawKnots {
    fn from(k: KnotLoss) -> Self {
        RawKnots { knots: k.xs.iter().zip(&k.ys).map(|(&x, &y)| [x, y]).collect(), left_limit: k.left_limit }
    }
}

impl KnotLoss {
    /// `left_limit` must agree with the linear extension: the first value when
    /// the first slope is zero, `−∞` otherwise.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, left_limit: f64) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() {
            return Err(Error::Loss("need at least two knots with matching values".into()));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::Loss("knots must be finite".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Loss("knot abscissae must increase strictly".into()));
        }
        let k = KnotLoss { xs, ys, left_limit };
        let s0 = k.slope(0);
        let expected = if s0 == 0.0 { k.ys[0] } else { f64::NEG_INFINITY };
        if left_limit != expected {
            return Err(Error::Loss(format!("declared left limit {left_limit} but the extension tends to {expected}")));
        }
        Ok(k)
    }

    fn slope(&self, seg: usize) -> f64 {
        (self.ys[seg + 1] - self.ys[seg]) / (self.xs[seg + 1] - self.xs[seg])
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x == f64::NEG_INFINITY {
            return self.left_limit;
        }
        if x <= self.xs[0] {
            let s = self.slope(0);
            return if s == 0.0 { self.ys[0] } else { self.ys[0] + s * (x - self.xs[0]) };
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1] + self.slope(n - 2) * (x - self.xs[n - 1]);
        }
        let seg = self.xs.partition_point(|&k| k <= x) - 1;
        self.ys[seg] + self.slope(seg) * (x - self.xs[seg])
    }

    fn right_deriv(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] {
            return self.slope(0);
        }
        if x >= self.xs[n - 1] {
            return self.slope(n - 2);
        }
        let seg = self.xs.partition_point(|&k| k <= x) - 1;
        self.slope(seg)
    }

    fn slope_range(&self) -> (f64, f64) {
        (self.slope(0), self.slope(self.xs.len() - 2))
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }
}

/// Convex nondecreasing loss `ℓ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum LossFn {
    /// `ℓ(x) = eˣ`.
    Exp,
    /// `ℓ(x) = ((1 + x)⁺)^q`, `q > 1`.
    PowerPlus { q: f64 },
    /// Piecewise-linear loss; its conjugate is computed numerically.
    Custom(KnotLoss),
}

impl LossFn {
    pub fn power_plus(q: f64) -> Result<Self> {
        let l = LossFn::PowerPlus { q };
        l.validate()?;
        Ok(l)
    }

    /// `ℓ(x)`; `x = −∞` gives the left limit.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            LossFn::Exp => x.exp(),
            LossFn::PowerPlus { q } => {
                let u = 1.0 + x;
                if u > 0.0 {
                    u.powf(*q)
                } else {
                    0.0
                }
            }
            LossFn::Custom(k) => k.eval(x),
        }
    }

    /// Right derivative `ℓ'(x+)`.
    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            LossFn::Exp => x.exp(),
            LossFn::PowerPlus { q } => {
                let u = 1.0 + x;
                if u > 0.0 {
                    q * u.powf(q - 1.0)
                } else {
                    0.0
                }
            }
            LossFn::Custom(k) => {
                if x == f64::NEG_INFINITY {
                    0.0
                } else {
                    k.right_deriv(x)
                }
            }
        }
    }

    /// `lim_{x→−∞} ℓ(x)`.
    pub fn left_limit(&self) -> f64 {
        match self {
            LossFn::Exp | LossFn::PowerPlus { .. } => 0.0,
            LossFn::Custom(k) => k.left_limit,
        }
    }

    /// Convex conjugate `ℓ*(y) = sup_x (xy − ℓ(x))`, possibly `+∞`.
    pub fn conjugate(&self, y: f64) -> f64 {
        match self {
            LossFn::Exp => {
                if y < 0.0 {
                    f64::INFINITY
                } else if y == 0.0 {
                    0.0
                } else {
                    y * y.ln() - y
                }
            }
            LossFn::PowerPlus { q } => {
                if y < 0.0 {
                    f64::INFINITY
                } else {
                    let p = q / (q - 1.0);
                    (q - 1.0) * q.powf(-p) * y.powf(p) - y
                }
            }
            LossFn::Custom(k) => numeric_conjugate(k, y),
        }
    }

    /// Admissibility checks: nondecreasing, convex (midpoint test on a grid),
    /// nonconstant, and `ℓ(x) < 1` at `x ∈ {−1e−3, −1, −10}`.
    pub fn validate(&self) -> Result<()> {
        if let LossFn::PowerPlus { q } = self {
            if !(q.is_finite() && *q > 1.0) {
                return Err(Error::Loss(format!("PowerPlus needs q > 1, got {q}")));
            }
        }
        let grid: Vec<f64> = (0..=400).map(|i| -20.0 + 0.1 * i as f64).collect();
        let vals: Vec<f64> = grid.iter().map(|&x| self.eval(x)).collect();
        for (i, w) in vals.windows(2).enumerate() {
            if w[1] < w[0] - 1e-12 * w[0].abs().max(1.0) {
                return Err(Error::Loss(format!("decreasing near x = {}", grid[i])));
            }
        }
        for i in 1..grid.len() - 1 {
            let mid = vals[i];
            let chord = 0.5 * (vals[i - 1] + vals[i + 1]);
            if mid > chord + 1e-9 * chord.abs().max(1.0) {
                return Err(Error::Loss(format!("midpoint convexity fails at x = {}", grid[i])));
            }
        }
        if vals.first() == vals.last() {
            return Err(Error::Loss("loss is constant".into()));
        }
        for x in [-1e-3, -1.0, -10.0] {
            if !(self.eval(x) < 1.0) {
                return Err(Error::Loss(format!("ℓ({x}) = {} is not below 1", self.eval(x))));
            }
        }
        Ok(())
    }
}

/// Numeric conjugate on a uniform grid over the knot range padded on both
/// sides, refined by golden section around the best grid point.
fn numeric_conjugate(k: &KnotLoss, y: f64) -> f64 {
    let (s_lo, s_hi) = k.slope_range();
    let tol = 1e-12 * (1.0 + y.abs());
    if y < s_lo - tol || y > s_hi + tol {
        return f64::INFINITY;
    }
    let x0 = k.xs[0];
    let x1 = *k.xs.last().unwrap();
    let pad = x1 - x0;
    let (a, b) = (x0 - pad, x1 + pad);
    let obj = |x: f64| x * y - k.eval(x);
    let h = (b - a) / (CONJUGATE_GRID - 1) as f64;
    let (mut best_i, mut best_v) = (0, f64::NEG_INFINITY);
    for i in 0..CONJUGATE_GRID {
        let v = obj(a + h * i as f64);
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let lo = a + h * best_i.saturating_sub(1) as f64;
    let hi = a + h * (best_i + 1).min(CONJUGATE_GRID - 1) as f64;
    let (_, refined) = golden_max(obj, lo, hi, 1e-12 * (1.0 + hi.abs()));
    // supporting lines through the knots are exact for piecewise-linear losses
    let at_knots = k.knots().map(|(x, fx)| x * y - fx).fold(f64::NEG_INFINITY, f64::max);
    best_v.max(refined).max(at_knots)
}
