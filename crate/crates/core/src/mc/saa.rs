//! Sample average approximation on a finite decision grid: exceedance of
//! `|V(L_n) − V(μ)|` and of the growth of the empirical minimizer's distance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_reps, rate_fit, stream, Family, RateFit, Sampler, TailEstimate};
use crate::error::{input, Error, Result};

/// Loss `h(x, w)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum SaaLoss {
    /// `a x² + b x + w (c + d x)`.
    Quadratic { a: f64, b: f64, c: f64, d: f64 },
    /// `|w − x|`.
    AbsDeviation,
}

impl SaaLoss {
    pub fn eval(&self, x: f64, w: f64) -> f64 {
        match self {
            SaaLoss::Quadratic { a, b, c, d } => a * x * x + b * x + w * (c + d * x),
            SaaLoss::AbsDeviation => (w - x).abs(),
        }
    }

    fn depends_on_w(&self, grid: &[f64]) -> bool {
        match self {
            SaaLoss::Quadratic { c, d, .. } => grid.iter().any(|x| c + d * x != 0.0),
            SaaLoss::AbsDeviation => true,
        }
    }

    /// `(1/n) Σ h(x, wᵢ)` for every grid point.
    fn empirical(&self, grid: &[f64], ws: &[f64]) -> Vec<f64> {
        let n = ws.len() as f64;
        match self {
            SaaLoss::Quadratic { .. } => {
                let mean = ws.iter().sum::<f64>() / n;
                grid.iter().map(|&x| self.eval(x, mean)).collect()
            }
            SaaLoss::AbsDeviation => grid.iter().map(|&x| ws.iter().map(|&w| (w - x).abs()).sum::<f64>() / n).collect(),
        }
    }
}

/// Growth function `φ` of the minimizer-tracking hypothesis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum Growth {
    /// `φ(t) = κ t²`.
    Quadratic { kappa: f64 },
}

impl Growth {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Growth::Quadratic { kappa } => kappa * t * t,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaaInstance {
    pub grid: Vec<f64>,
    pub loss: SaaLoss,
    pub sampler: Sampler,
    pub eps: f64,
    pub q: f64,
}

/// Index of the first minimum.
fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

impl SaaInstance {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() || self.grid.iter().any(|x| !x.is_finite()) {
            return input("decision grid must be a nonempty list of finite points");
        }
        if !(self.eps > 0.0) {
            return input(format!("ε must be positive, got {}", self.eps));
        }
        if !(self.q > 1.0) {
            return input(format!("q must exceed 1, got {}", self.q));
        }
        self.sampler.validate()?;
        if self.loss.depends_on_w(&self.grid) {
            // ψ = (sup_x h)⁺ grows linearly in |w|
            self.sampler.law()?.validate(self.q)?;
        }
        Ok(())
    }

    /// `x ↦ ∫ h(x, ·) dμ` on the grid.
    pub fn objective(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let law = self.sampler.law()?;
        Ok(self
            .grid
            .iter()
            .map(|&x| law.expect_1d(|w| self.loss.eval(x, w), &[x]))
            .collect())
    }

    /// `V(μ)`.
    pub fn value(&self) -> Result<f64> {
        Ok(self.objective()?.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// Sample estimate of `∫ ψ^q dμ` from `count` draws.
    pub fn psi_moment(&self, count: usize, seed: u64) -> Result<f64> {
        let ws = self.sampler.draws(seed, count)?;
        let total: f64 = ws
            .iter()
            .map(|&w| {
                let sup = self.grid.iter().map(|&x| self.loss.eval(x, w)).fold(f64::NEG_INFINITY, f64::max);
                sup.max(0.0).powf(self.q)
            })
            .sum();
        Ok(total / count as f64)
    }

    /// Empirical objective of replication `i` at sample size `n`.
    fn replicate(&self, prepared: &super::Prepared, n: usize, seed: u64, i: u64) -> Vec<f64> {
        let mut rng = stream(seed, i);
        let ws: Vec<f64> = (0..n).map(|_| prepared.sample(&mut rng)).collect();
        self.loss.empirical(&self.grid, &ws)
    }

    /// Exact probability of `event(empirical objective)` under `μ^n` for a
    /// finite-support law, by enumeration of all `n`-tuples.
    fn enumerate(&self, n: usize, event: impl Fn(&[f64]) -> bool) -> Result<f64> {
        let Family::FiniteSupport { points, probs } = &self.sampler.family else {
            return input("exact enumeration needs a finite-support law");
        };
        let m = points.len();
        let total = (m as u128).checked_pow(n as u32).filter(|&t| t <= 1 << 24);
        let Some(total) = total else {
            return input(format!("{m}^{n} tuples exceed the enumeration cap"));
        };
        let shift = self.sampler.shift();
        let mut p = 0.0;
        let mut ws = vec![0.0; n];
        for code in 0..total as usize {
            let mut r = code;
            let mut w = 1.0;
            for slot in ws.iter_mut() {
                let j = r % m;
                r /= m;
                *slot = points[j] - shift;
                w *= probs.get(j);
            }
            if w > 0.0 && event(&self.loss.empirical(&self.grid, &ws)) {
                p += w;
            }
        }
        Ok(p)
    }

    /// Exact `μ^n(|V(L_n) − V(μ)| ≥ ε)` for a finite-support law.
    pub fn exact_exceedance(&self, n: usize) -> Result<f64> {
        let v = self.value()?;
        self.enumerate(n, |obj| (obj.iter().copied().fold(f64::INFINITY, f64::min) - v).abs() >= self.eps)
    }

    /// Checks `V(x) − V(x̂) ≥ φ(|x − x̂|)` on the grid with a unique minimizer `x̂`.
    pub fn validate_growth(&self, phi: &Growth) -> Result<usize> {
        let obj = self.objective()?;
        let best = argmin(&obj);
        let scale = 1e-12 * (1.0 + obj[best].abs());
        let mut problems = Vec::new();
        for (i, (&x, &v)) in self.grid.iter().zip(&obj).enumerate() {
            if i == best {
                continue;
            }
            if v - obj[best] <= scale {
                problems.push(format!("tie with the minimizer at x = {x}"));
            } else if v - obj[best] < phi.eval((x - self.grid[best]).abs()) - scale {
                problems.push(format!(
                    "growth fails at x = {x}: V(x) − V(x̂) = {} < φ(d) = {}",
                    v - obj[best],
                    phi.eval((x - self.grid[best]).abs())
                ));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Input(format!("growth hypothesis refused: {}", problems.join("; "))));
        }
        Ok(best)
    }

    /// Exact `μ^n(φ(|x̂(L_n) − x̂(μ)|) ≥ ε)` for a finite-support law.
    pub fn exact_argmin_exceedance(&self, phi: &Growth, n: usize) -> Result<f64> {
        let best = self.validate_growth(phi)?;
        let x0 = self.grid[best];
        self.enumerate(n, |obj| phi.eval((self.grid[argmin(obj)] - x0).abs()) >= self.eps)
    }
}

/// One-sided Mann–Kendall test for an upward trend.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MannKendall {
    pub s: i64,
    /// `P(S ≥ s)` under exchangeability.
    pub p_value: f64,
    pub exact: bool,
}

fn mk_statistic(y: &[f64]) -> i64 {
    let mut s = 0;
    for i in 0..y.len() {
        for j in i + 1..y.len() {
            s += match y[j].partial_cmp(&y[i]) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            };
        }
    }
    s
}

/// Exact permutation null for up to 9 points (ties included); normal
/// approximation with tie-corrected variance beyond that.
pub fn mann_kendall_upward(y: &[f64]) -> Result<MannKendall> {
    let n = y.len();
    if n < 3 {
        return Err(Error::Inconclusive(format!("trend test needs 3 points, got {n}")));
    }
    let s = mk_statistic(y);
    if n <= 9 {
        let mut perm = y.to_vec();
        let (mut ge, mut total) = (0u64, 0u64);
        // Heap's algorithm
        let mut c = vec![0usize; n];
        let mut tally = |p: &[f64]| {
            total += 1;
            if mk_statistic(p) >= s {
                ge += 1;
            }
        };
        tally(&perm);
        let mut i = 1;
        while i < n {
            if c[i] < i {
                if i % 2 == 0 {
                    perm.swap(0, i);
                } else {
                    perm.swap(c[i], i);
                }
                tally(&perm);
                c[i] += 1;
                i = 1;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
        return Ok(MannKendall { s, p_value: ge as f64 / total as f64, exact: true });
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    let mut k = 0;
    while k < n {
        let mut j = k;
        while j + 1 < n && sorted[j + 1] == sorted[k] {
            j += 1;
        }
        let t = (j - k + 1) as f64;
        ties += t * (t - 1.0) * (2.0 * t + 5.0);
        k = j + 1;
    }
    let nf = n as f64;
    let var = (nf * (nf - 1.0) * (2.0 * nf + 5.0) - ties) / 18.0;
    let z = if s > 0 { (s as f64 - 1.0) / var.sqrt() } else { s as f64 / var.sqrt() };
    let p = 0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2);
    Ok(MannKendall { s, p_value: p, exact: false })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SaaRow {
    #[serde(flatten)]
    pub estimate: TailEstimate,
    /// `n^{q−1} p̂`.
    pub scaled: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SaaReport {
    pub v_mu: f64,
    pub objective: Vec<f64>,
    pub psi_moment: f64,
    pub rows: Vec<SaaRow>,
    /// `None` when fewer than three schedule points have hits.
    pub fit: Option<RateFit>,
    /// `None` for schedules shorter than three points.
    pub trend: Option<MannKendall>,
}

fn scaled_rows(inst: &SaaInstance, est: Vec<TailEstimate>) -> Vec<SaaRow> {
    est.into_iter()
        .map(|e| {
            let scaled = (e.n as f64).powf(inst.q - 1.0) * e.p_hat;
            SaaRow { estimate: e, scaled }
        })
        .collect()
}

fn fit_and_trend(rows: &[SaaRow]) -> Result<(Option<RateFit>, Option<MannKendall>)> {
    let est: Vec<TailEstimate> = rows.iter().map(|r| r.estimate.clone()).collect();
    let fit = match rate_fit(&est) {
        Ok(f) => Some(f),
        Err(Error::Inconclusive(msg)) => {
            log::info!("{msg}");
            None
        }
        Err(e) => return Err(e),
    };
    let scaled: Vec<f64> = rows.iter().map(|r| r.scaled).collect();
    let trend = if scaled.len() >= 3 { Some(mann_kendall_upward(&scaled)?) } else { None };
    Ok((fit, trend))
}

/// Per-`n` estimates of `μ^n(|V(L_n) − V(μ)| ≥ ε)`.
pub fn saa_run(inst: &SaaInstance, schedule: &[usize], reps: usize, seed: u64) -> Result<SaaReport> {
    check_reps(reps)?;
    let objective = inst.objective()?;
    let v_mu = objective.iter().copied().fold(f64::INFINITY, f64::min);
    let prepared = inst.sampler.prepare()?;
    let est = schedule
        .iter()
        .map(|&n| {
            let hits = (0..reps as u64)
                .into_par_iter()
                .filter(|&i| {
                    let obj = inst.replicate(&prepared, n, seed, i);
                    (obj.iter().copied().fold(f64::INFINITY, f64::min) - v_mu).abs() >= inst.eps
                })
                .count();
            TailEstimate::from_hits(n, inst.eps, reps, hits)
        })
        .collect();
    let rows = scaled_rows(inst, est);
    let (fit, trend) = fit_and_trend(&rows)?;
    Ok(SaaReport { v_mu, objective, psi_moment: inst.psi_moment(100_000, seed)?, rows, fit, trend })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArgminReport {
    pub x_hat: f64,
    pub phi: Growth,
    pub rows: Vec<SaaRow>,
    pub fit: Option<RateFit>,
    pub trend: Option<MannKendall>,
}

/// Per-`n` estimates of `μ^n(φ(|x̂(L_n) − x̂(μ)|) ≥ ε)`; refuses when `φ`
/// fails on the grid.
pub fn argmin_tracking(
    inst: &SaaInstance,
    phi: &Growth,
    schedule: &[usize],
    reps: usize,
    seed: u64,
) -> Result<ArgminReport> {
    check_reps(reps)?;
    let best = inst.validate_growth(phi)?;
    let x0 = inst.grid[best];
    let prepared = inst.sampler.prepare()?;
    let est = schedule
        .iter()
        .map(|&n| {
            let hits = (0..reps as u64)
                .into_par_iter()
                .filter(|&i| {
                    let obj = inst.replicate(&prepared, n, seed, i);
                    phi.eval((inst.grid[argmin(&obj)] - x0).abs()) >= inst.eps
                })
                .count();
            TailEstimate::from_hits(n, inst.eps, reps, hits)
        })
        .collect();
    let rows = scaled_rows(inst, est);
    let (fit, trend) = fit_and_trend(&rows)?;
    Ok(ArgminReport { x_hat: x0, phi: *phi, rows, fit, trend })
}
