//! Heavy-tail Cramér apparatus: `Λ`, its conjugate `Λ*`, the moment constant
//! `M_q` and the polynomial deviation bound.
//!
//! `Λ(x*) = inf{m : E[((1 + ⟨x*, X⟩ − m)⁺)^q] ≤ 1}`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, LogNormal, StudentsT};

use crate::alpha::lp_entropy;
use crate::error::{input, Error, Result};
use crate::optim::{bisect_threshold, golden_max};
use crate::quad::integrate_pieces;
use crate::space::Dist;

const QUAD_TOL: f64 = 1e-11;

/// Law of `X` on `ℝ^d`, `d ≤ 3`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum SampleLaw {
    /// Plug-in law of `N` observed vectors.
    Empirical { samples: Vec<Vec<f64>> },
    /// `P − shift` with `P` standard Pareto (`P ≥ 1`, tail index `a`).
    Pareto { a: f64, shift: f64 },
    /// Standard Student t.
    StudentT { df: f64 },
    /// `exp(σ Z) − shift`.
    LogNormal { sigma: f64, shift: f64 },
    /// Finitely many points on the line.
    FiniteSupport { points: Vec<f64>, probs: Dist },
}

impl SampleLaw {
    /// Pareto law shifted by its mean `a/(a−1)`.
    pub fn centered_pareto(a: f64) -> Self {
        SampleLaw::Pareto { a, shift: a / (a - 1.0) }
    }

    pub fn point_mass(x: f64) -> Self {
        SampleLaw::FiniteSupport { points: vec![x], probs: Dist::point(1, 0) }
    }

    pub fn dim(&self) -> usize {
        match self {
            SampleLaw::Empirical { samples } => samples.first().map_or(0, Vec::len),
            _ => 1,
        }
    }

    /// Shape checks and finiteness of the `q`-th moment.
    pub fn validate(&self, q: f64) -> Result<()> {
        if !(q.is_finite() && q > 1.0) {
            return input(format!("q must exceed 1, got {q}"));
        }
        match self {
            SampleLaw::Empirical { samples } => {
                let d = self.dim();
                if samples.is_empty() || d == 0 || d > 3 {
                    return input("empirical law needs samples of dimension 1 to 3");
                }
                if samples.iter().any(|s| s.len() != d || s.iter().any(|v| !v.is_finite())) {
                    return input("samples must be finite vectors of equal dimension");
                }
            }
            SampleLaw::Pareto { a, shift } => {
                if !(*a > q) || !shift.is_finite() {
                    return input(format!("Pareto tail a = {a} needs a > q = {q} for a finite q-th moment"));
                }
            }
            SampleLaw::StudentT { df } => {
                if !(*df > q) {
                    return input(format!("Student t with df = {df} has no finite moment of order {q}"));
                }
            }
            SampleLaw::LogNormal { sigma, shift } => {
                if !(sigma.is_finite() && *sigma > 0.0 && shift.is_finite()) {
                    return input("log-normal needs σ > 0 and a finite shift");
                }
            }
            SampleLaw::FiniteSupport { points, probs } => {
                if points.len() != probs.len() || points.iter().any(|p| !p.is_finite()) {
                    return input("finite support needs one finite point per probability");
                }
            }
        }
        Ok(())
    }

    /// `E[g(X)]` for a 1-d law; `kinks` are points where `g` is not smooth.
    pub fn expect_1d(&self, g: impl Fn(f64) -> f64, kinks: &[f64]) -> f64 {
        match self {
            SampleLaw::Empirical { samples } => samples.iter().map(|s| g(s[0])).sum::<f64>() / samples.len() as f64,
            SampleLaw::FiniteSupport { points, probs } => {
                points.iter().zip(probs.weights()).filter(|(_, &w)| w > 0.0).map(|(&x, &w)| w * g(x)).sum()
            }
            SampleLaw::Pareto { a, shift } => {
                let (a, s) = (*a, *shift);
                let breaks = with_center(kinks, 2.0 - s);
                integrate_pieces(|x| g(x) * a * (x + s).powf(-a - 1.0), 1.0 - s, f64::INFINITY, &breaks, QUAD_TOL)
            }
            SampleLaw::StudentT { df } => {
                let t = StudentsT::new(0.0, 1.0, *df).expect("valid Student t");
                let breaks = with_center(kinks, 0.0);
                integrate_pieces(|x| g(x) * t.pdf(x), f64::NEG_INFINITY, f64::INFINITY, &breaks, QUAD_TOL)
            }
            SampleLaw::LogNormal { sigma, shift } => {
                let ln = LogNormal::new(0.0, *sigma).expect("valid log-normal");
                let s = *shift;
                let breaks = with_center(kinks, 1.0 - s);
                integrate_pieces(|x| g(x) * ln.pdf(x + s), -s, f64::INFINITY, &breaks, QUAD_TOL)
            }
        }
    }

    /// `E[g(X)]` for any law, where `g` sees the full vector.
    fn expect_vec(&self, g: impl Fn(&[f64]) -> f64, kinks: &[f64]) -> f64 {
        match self {
            SampleLaw::Empirical { samples } => samples.iter().map(|s| g(s)).sum::<f64>() / samples.len() as f64,
            _ => self.expect_1d(|x| g(&[x]), kinks),
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        match self {
            SampleLaw::Empirical { samples } => {
                let d = self.dim();
                (0..d).map(|j| samples.iter().map(|s| s[j]).sum::<f64>() / samples.len() as f64).collect()
            }
            SampleLaw::Pareto { a, shift } => vec![a / (a - 1.0) - shift],
            SampleLaw::StudentT { .. } => vec![0.0],
            SampleLaw::LogNormal { sigma, shift } => vec![(0.5 * sigma * sigma).exp() - shift],
            SampleLaw::FiniteSupport { points, probs } => vec![probs.integrate(points)],
        }
    }
}

/// Kinks plus a point in the bulk of the law, so that no piece has its mass
/// far from the endpoint the double-exponential map clusters at.
fn with_center(kinks: &[f64], center: f64) -> Vec<f64> {
    let mut v = kinks.to_vec();
    v.push(center);
    v
}

fn inner(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Λ(x*)`; `+∞` if the defining equation has no solution on the expanded bracket.
pub fn lambda(x_star: &[f64], law: &SampleLaw, q: f64) -> Result<f64> {
    law.validate(q)?;
    if x_star.len() != law.dim() {
        return input(format!("dual vector has dimension {}, law has {}", x_star.len(), law.dim()));
    }
    let g = |m: f64| -> f64 {
        let kinks: Vec<f64> = if x_star.len() == 1 && x_star[0] != 0.0 { vec![(m - 1.0) / x_star[0]] } else { vec![] };
        law.expect_vec(
            |x| {
                let u = 1.0 + inner(x_star, x) - m;
                if u > 0.0 {
                    u.powf(q)
                } else {
                    0.0
                }
            },
            &kinks,
        )
    };
    let mut hi = 1.0;
    let mut step = 1.0;
    while !(g(hi) <= 1.0) {
        hi += step;
        step *= 2.0;
        if step > 1e15 {
            log::warn!("Λ: E[((1 + ⟨x*, X⟩ − m)⁺)^q] stays above 1; reporting +∞");
            return Ok(f64::INFINITY);
        }
    }
    let mut lo = hi - 1.0;
    step = 1.0;
    while g(lo) <= 1.0 {
        hi = lo;
        lo -= step;
        step *= 2.0;
        if step > 1e15 {
            return Err(Error::Numeric("Λ: no lower bracket found".into()));
        }
    }
    Ok(bisect_threshold(|m| g(m) <= 1.0, lo, hi, |m| 1e-12 * (1.0 + m.abs())))
}

/// `M_q = E[‖X‖^q]^{1/q}`.
pub fn moment_mq(law: &SampleLaw, q: f64) -> Result<f64> {
    law.validate(q)?;
    let m = law.expect_vec(|x| inner(x, x).sqrt().powf(q), &[0.0]);
    Ok(m.powf(1.0 / q))
}

/// `(M_q/(r − M_q))^q · n^{1−q}`, valid for `r > M_q`.
pub fn deviation_bound(r: f64, mq: f64, q: f64, n: f64) -> Result<f64> {
    if !(q > 1.0) || !(mq >= 0.0) || !(n >= 1.0) {
        return input("deviation bound needs q > 1, M_q ≥ 0, n ≥ 1");
    }
    if !(r > mq) {
        return input(format!("r = {r} must exceed M_q = {mq}; the bound is vacuous otherwise"));
    }
    Ok((mq / (r - mq)).powf(q) * n.powf(1.0 - q))
}

/// Radius of the divergence test along the ray through `x`.
pub const RAY_RADIUS: f64 = 1e3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambdaStar {
    #[serde(with = "crate::ext::serde_f64_field")]
    pub value: f64,
    pub argmax: Vec<f64>,
}

/// `Λ*(x) = sup_{x*} (⟨x*, x⟩ − Λ(x*))`: coarse grid, then coordinate-wise
/// golden section. `+∞` when the objective still grows at radius `10³` along
/// the ray through `x`.
pub fn lambda_star(x: &[f64], law: &SampleLaw, q: f64) -> Result<LambdaStar> {
    law.validate(q)?;
    let d = law.dim();
    if x.len() != d {
        return input(format!("point has dimension {}, law has {d}", x.len()));
    }
    let obj = |t: &[f64]| -> f64 {
        match lambda(t, law, q) {
            Ok(l) => inner(t, x) - l,
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let norm = inner(x, x).sqrt();
    if norm > 0.0 {
        let dir: Vec<f64> = x.iter().map(|v| v / norm).collect();
        let at = |r: f64| obj(&dir.iter().map(|v| v * r).collect::<Vec<_>>());
        let (far, mid) = (at(RAY_RADIUS), at(0.5 * RAY_RADIUS));
        if far - mid > 1e-6 * RAY_RADIUS {
            return Ok(LambdaStar { value: f64::INFINITY, argmax: dir.iter().map(|v| v * RAY_RADIUS).collect() });
        }
    }
    let axis: Vec<f64> = if d == 1 {
        let mut g = vec![0.0];
        for k in -12..=12 {
            let v = 10f64.powf(k as f64 / 4.0);
            g.push(v);
            g.push(-v);
        }
        g.sort_by(f64::total_cmp);
        g
    } else {
        vec![-10.0, -3.0, -1.0, -0.3, -0.1, 0.0, 0.1, 0.3, 1.0, 3.0, 10.0]
    };
    let mut best = vec![0.0; d];
    let mut best_v = obj(&best);
    let total = axis.len().pow(d as u32);
    for code in 0..total {
        let mut r = code;
        let t: Vec<f64> = (0..d)
            .map(|_| {
                let v = axis[r % axis.len()];
                r /= axis.len();
                v
            })
            .collect();
        let v = obj(&t);
        if v > best_v {
            best_v = v;
            best = t;
        }
    }
    for _ in 0..if d == 1 { 1 } else { 40 } {
        let before = best_v;
        for j in 0..d {
            let c = best[j];
            let (lo, hi) = if d == 1 {
                let i = axis.iter().position(|&v| v == c).unwrap_or(0);
                (axis[i.saturating_sub(1)], axis[(i + 1).min(axis.len() - 1)])
            } else {
                let w = 2.0 * c.abs().max(1.0);
                (c - w, c + w)
            };
            let base = best.clone();
            let (t, v) = golden_max(
                |s| {
                    let mut p = base.clone();
                    p[j] = s;
                    obj(&p)
                },
                lo,
                hi,
                1e-10 * (1.0 + c.abs()),
            );
            if v > best_v {
                best_v = v;
                best[j] = t;
            }
        }
        if best_v - before <= 1e-12 {
            break;
        }
    }
    Ok(LambdaStar { value: best_v, argmax: best })
}

/// `inf{α(ν) : Σ νᵢ zᵢ = x}` with `α` the `L^p` entropy (`p = q/(q−1)`)
/// relative to a finite-support law; up to four support points.
pub fn lambda_star_constrained(x: f64, points: &[f64], probs: &Dist, q: f64) -> Result<f64> {
    let k = points.len();
    if k != probs.len() || k == 0 || k > 4 {
        return input("constrained form supports 1 to 4 points");
    }
    let p = q / (q - 1.0);
    if k == 1 {
        return Ok(if (points[0] - x).abs() < 1e-12 { 0.0 } else { f64::INFINITY });
    }
    // two pivots with distinct locations carry the two linear constraints
    let (i, j) = (0..k)
        .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
        .max_by(|a, b| (points[a.0] - points[a.1]).abs().total_cmp(&(points[b.0] - points[b.1]).abs()))
        .unwrap();
    if points[i] == points[j] {
        return Ok(if (points[0] - x).abs() < 1e-12 { 0.0 } else { f64::INFINITY });
    }
    let free: Vec<usize> = (0..k).filter(|&t| t != i && t != j).collect();
    let objective = |w: &[f64]| -> f64 {
        let mass: f64 = w.iter().sum();
        let moment: f64 = free.iter().zip(w).map(|(&t, &wt)| wt * points[t]).sum();
        // ν_i + ν_j = 1 − mass, ν_i z_i + ν_j z_j = x − moment
        let rest = 1.0 - mass;
        let nj = (x - moment - rest * points[i]) / (points[j] - points[i]);
        let ni = rest - nj;
        if ni < -1e-15 || nj < -1e-15 || rest < -1e-15 {
            return f64::INFINITY;
        }
        let mut nu = vec![0.0; k];
        nu[i] = ni.max(0.0);
        nu[j] = nj.max(0.0);
        for (&t, &wt) in free.iter().zip(w) {
            nu[t] = wt;
        }
        match Dist::from_unnormalized(nu) {
            Ok(d) => lp_entropy(&d, probs, p).value(),
            Err(_) => f64::INFINITY,
        }
    };
    let dims = free.len();
    if dims == 0 {
        return Ok(objective(&[]));
    }
    let per: usize = if dims == 1 { 4001 } else { 201 };
    let mut best = vec![0.0; dims];
    let mut best_v = f64::INFINITY;
    for code in 0..per.pow(dims as u32) {
        let mut r = code;
        let w: Vec<f64> = (0..dims)
            .map(|_| {
                let v = (r % per) as f64 / (per - 1) as f64;
                r /= per;
                v
            })
            .collect();
        let v = objective(&w);
        if v < best_v {
            best_v = v;
            best = w;
        }
    }
    if best_v.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let h = 1.0 / (per - 1) as f64;
    for _ in 0..50 {
        let before = best_v;
        for t in 0..dims {
            let base = best.clone();
            let (s, v) = crate::optim::golden_min(
                |s| {
                    let mut w = base.clone();
                    w[t] = s;
                    objective(&w)
                },
                (base[t] - h).max(0.0),
                (base[t] + h).min(1.0),
                1e-12,
            );
            if v < best_v {
                best_v = v;
                best[t] = s;
            }
        }
        if before - best_v <= 1e-14 {
            break;
        }
    }
    Ok(best_v)
}

/// `Λ` on a dual grid and `Λ*` on a primal grid, with the shape checks.
#[derive(Clone, Debug, Serialize)]
pub struct ConjugatePair {
    pub q: f64,
    pub p: f64,
    pub mq: f64,
    pub dual_grid: Vec<f64>,
    pub lambda: Vec<f64>,
    pub primal_grid: Vec<f64>,
    #[serde(with = "crate::ext::vec_f64")]
    pub lambda_star: Vec<f64>,
    /// `Λ(0)`; zero for every law since the defining equation reduces to `((1 − m)⁺)^q ≤ 1`.
    pub lambda_at_zero: f64,
}

impl ConjugatePair {
    /// 1-d laws only.
    pub fn compute(law: &SampleLaw, q: f64, dual_grid: &[f64], primal_grid: &[f64]) -> Result<Self> {
        if law.dim() != 1 {
            return input("conjugate tables are tabulated for 1-d laws");
        }
        let lambda_vals = dual_grid.iter().map(|&t| lambda(&[t], law, q)).collect::<Result<Vec<_>>>()?;
        let star = primal_grid.iter().map(|&x| lambda_star(&[x], law, q).map(|r| r.value)).collect::<Result<Vec<_>>>()?;
        Ok(ConjugatePair {
            q,
            p: q / (q - 1.0),
            mq: moment_mq(law, q)?,
            dual_grid: dual_grid.to_vec(),
            lambda: lambda_vals,
            primal_grid: primal_grid.to_vec(),
            lambda_star: star,
            lambda_at_zero: lambda(&[0.0], law, q)?,
        })
    }

    /// Midpoint convexity on consecutive equispaced triples of a grid.
    fn midpoint_convex(grid: &[f64], vals: &[f64], tol: f64) -> bool {
        (1..grid.len().saturating_sub(1)).all(|i| {
            let equispaced = ((grid[i] - grid[i - 1]) - (grid[i + 1] - grid[i])).abs() < 1e-12;
            if !equispaced || !vals[i - 1].is_finite() || !vals[i + 1].is_finite() {
                return true;
            }
            vals[i] <= 0.5 * (vals[i - 1] + vals[i + 1]) + tol
        })
    }

    pub fn lambda_is_convex(&self) -> bool {
        Self::midpoint_convex(&self.dual_grid, &self.lambda, 1e-8)
    }

    pub fn lambda_star_is_convex(&self) -> bool {
        Self::midpoint_convex(&self.primal_grid, &self.lambda_star, 1e-6)
    }

    /// `Λ*(x) ≥ −1 + |x|/M_q` at every primal grid point.
    pub fn minorant_holds(&self) -> bool {
        self.primal_grid.iter().zip(&self.lambda_star).all(|(&x, &v)| v >= -1.0 + x.abs() / self.mq - 1e-7)
    }
}
