//! Monte Carlo harness: samplers, tail estimates with Wilson intervals and
//! log-log rate fits.
//!
//! Replication `i` draws from the ChaCha8 stream `i` of the run seed, so
//! results do not depend on the thread count.

pub mod azuma;
pub mod saa;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Pareto, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::cramer::SampleLaw;
use crate::error::{input, Error, Result};
use crate::space::Dist;

/// Fewest replications accepted by the estimators.
pub const MIN_REPLICATIONS: usize = 1000;
/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;
/// One-sided 95% normal quantile.
pub const Z95_ONE_SIDED: f64 = 1.644_853_626_951_472_2;

/// Generator for replication `i` of a run seeded with `seed`.
pub fn stream(seed: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundedKind {
    /// Fair `±1`.
    Rademacher,
    /// Uniform on `[−1, 1]`.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum Family {
    /// Standard Pareto on `[1, ∞)` with tail index `a`.
    Pareto { a: f64 },
    StudentT { df: f64 },
    /// `exp(σ Z)`.
    LogNormal { sigma: f64 },
    FiniteSupport { points: Vec<f64>, probs: Dist },
    BoundedMartingaleIncrement { increment: BoundedKind },
}

/// I.i.d. real samples from a family, optionally shifted by the analytic mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampler {
    pub family: Family,
    #[serde(default)]
    pub centered: bool,
}

enum Draw {
    Pareto(Pareto<f64>),
    StudentT(StudentT<f64>),
    LogNormal(LogNormal<f64>),
    Finite(Vec<f64>, WeightedIndex<f64>),
    Rademacher,
    Uniform,
}

/// A sampler with its distribution objects built once.
pub struct Prepared {
    draw: Draw,
    shift: f64,
}

impl Prepared {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = match &self.draw {
            Draw::Pareto(d) => d.sample(rng),
            Draw::StudentT(d) => d.sample(rng),
            Draw::LogNormal(d) => d.sample(rng),
            Draw::Finite(points, idx) => points[idx.sample(rng)],
            Draw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Draw::Uniform => 2.0 * rng.random::<f64>() - 1.0,
        };
        x - self.shift
    }

    /// Sum of `n` draws.
    pub fn sum<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> f64 {
        (0..n).map(|_| self.sample(rng)).sum()
    }
}

impl Sampler {
    pub fn new(family: Family, centered: bool) -> Result<Self> {
        let s = Sampler { family, centered };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.family {
            Family::Pareto { a } => {
                if !(a.is_finite() && *a > 0.0) {
                    return input(format!("Pareto tail index must be positive, got {a}"));
                }
                if self.centered && *a <= 1.0 {
                    return input("centering a Pareto law needs a > 1");
                }
            }
            Family::StudentT { df } => {
                if !(df.is_finite() && *df > 0.0) {
                    return input(format!("degrees of freedom must be positive, got {df}"));
                }
                if self.centered && *df <= 1.0 {
                    return input("centering a Student t law needs df > 1");
                }
            }
            Family::LogNormal { sigma } => {
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return input(format!("log-normal σ must be positive, got {sigma}"));
                }
            }
            Family::FiniteSupport { points, probs } => {
                if points.len() != probs.len() || points.iter().any(|p| !p.is_finite()) {
                    return input("finite support needs one finite point per probability");
                }
            }
            Family::BoundedMartingaleIncrement { .. } => {}
        }
        Ok(())
    }

    /// Analytic mean of the unshifted family.
    pub fn raw_mean(&self) -> f64 {
        match &self.family {
            Family::Pareto { a } => a / (a - 1.0),
            Family::StudentT { .. } => 0.0,
            Family::LogNormal { sigma } => (0.5 * sigma * sigma).exp(),
            Family::FiniteSupport { points, probs } => probs.integrate(points),
            Family::BoundedMartingaleIncrement { .. } => 0.0,
        }
    }

    pub fn shift(&self) -> f64 {
        if self.centered {
            self.raw_mean()
        } else {
            0.0
        }
    }

    pub fn prepare(&self) -> Result<Prepared> {
        self.validate()?;
        let numeric = |e: String| Error::Input(e);
        let draw = match &self.family {
            Family::Pareto { a } => Draw::Pareto(Pareto::new(1.0, *a).map_err(|e| numeric(e.to_string()))?),
            Family::StudentT { df } => Draw::StudentT(StudentT::new(*df).map_err(|e| numeric(e.to_string()))?),
            Family::LogNormal { sigma } => {
                Draw::LogNormal(LogNormal::new(0.0, *sigma).map_err(|e| numeric(e.to_string()))?)
            }
            Family::FiniteSupport { points, probs } => Draw::Finite(
                points.clone(),
                WeightedIndex::new(probs.weights().iter().copied()).map_err(|e| numeric(e.to_string()))?,
            ),
            Family::BoundedMartingaleIncrement { increment: BoundedKind::Rademacher } => Draw::Rademacher,
            Family::BoundedMartingaleIncrement { increment: BoundedKind::Uniform } => Draw::Uniform,
        };
        Ok(Prepared { draw, shift: self.shift() })
    }

    /// The same law for the Cramér module's quadrature.
    pub fn law(&self) -> Result<SampleLaw> {
        let s = self.shift();
        Ok(match &self.family {
            Family::Pareto { a } => SampleLaw::Pareto { a: *a, shift: s },
            Family::StudentT { df } => SampleLaw::StudentT { df: *df },
            Family::LogNormal { sigma } => SampleLaw::LogNormal { sigma: *sigma, shift: s },
            Family::FiniteSupport { points, probs } => SampleLaw::FiniteSupport {
                points: points.iter().map(|p| p - s).collect(),
                probs: probs.clone(),
            },
            Family::BoundedMartingaleIncrement { increment: BoundedKind::Rademacher } => SampleLaw::FiniteSupport {
                points: vec![-1.0, 1.0],
                probs: Dist::uniform(2),
            },
            Family::BoundedMartingaleIncrement { increment: BoundedKind::Uniform } => {
                return input("uniform increments have no quadrature law here")
            }
        })
    }

    /// `count` draws from stream 0 of `seed`.
    pub fn draws(&self, seed: u64, count: usize) -> Result<Vec<f64>> {
        let p = self.prepare()?;
        let mut rng = stream(seed, 0);
        Ok((0..count).map(|_| p.sample(&mut rng)).collect())
    }
}

/// Wilson score interval for `hits` out of `reps` at normal quantile `z`.
pub fn wilson(hits: usize, reps: usize, z: f64) -> (f64, f64) {
    let r = reps as f64;
    let p = hits as f64 / r;
    let z2 = z * z;
    let denom = 1.0 + z2 / r;
    let center = (p + z2 / (2.0 * r)) / denom;
    let half = z / denom * (p * (1.0 - p) / r + z2 / (4.0 * r * r)).sqrt();
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

/// Exceedance frequency over `reps` replications with its 95% Wilson interval.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailEstimate {
    pub n: usize,
    pub r: f64,
    pub reps: usize,
    pub hits: usize,
    pub p_hat: f64,
    pub lo: f64,
    pub hi: f64,
    /// Analytic upper bound for this cell, when one applies.
    pub bound: Option<f64>,
}

impl TailEstimate {
    pub fn from_hits(n: usize, r: f64, reps: usize, hits: usize) -> Self {
        let (lo, hi) = wilson(hits, reps, Z95);
        TailEstimate { n, r, reps, hits, p_hat: hits as f64 / reps as f64, lo, hi, bound: None }
    }
}

pub(crate) fn check_reps(reps: usize) -> Result<()> {
    if reps < MIN_REPLICATIONS {
        return Err(Error::Inconclusive(format!(
            "{reps} replications is below the minimum of {MIN_REPLICATIONS}"
        )));
    }
    Ok(())
}

/// Fraction of replications with `S_n/n ≥ r`.
pub fn estimate_tail(sampler: &Sampler, n: usize, r: f64, reps: usize, seed: u64) -> Result<TailEstimate> {
    check_reps(reps)?;
    if n == 0 {
        return input("n must be positive");
    }
    let p = sampler.prepare()?;
    let threshold = n as f64 * r;
    let hits = (0..reps as u64)
        .into_par_iter()
        .filter(|&i| p.sum(&mut stream(seed, i), n) >= threshold)
        .count();
    Ok(TailEstimate::from_hits(n, r, reps, hits))
}

/// Least-squares slope of `log p` against `log n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub se: f64,
    pub intercept: f64,
    /// Schedule points that entered the fit.
    pub used: Vec<usize>,
}

impl RateFit {
    /// One-sided 95% upper confidence bound on the slope.
    pub fn slope_upper(&self) -> f64 {
        self.slope + Z95_ONE_SIDED * self.se
    }
}

fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64, f64) {
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - xm).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((a, c), b)| b * (a - xm) * (c - ym)).sum();
    let slope = sxy / sxx;
    (slope, ym - slope * xm, sxx)
}

/// Weighted fit to estimated tails, weights from the delta-method variance
/// `(1 − p̂)/(R p̂)` of `log p̂`. Cells with `p̂ ∈ {0, 1}` are excluded.
pub fn rate_fit(estimates: &[TailEstimate]) -> Result<RateFit> {
    let usable: Vec<&TailEstimate> = estimates.iter().filter(|e| e.hits > 0 && e.hits < e.reps).collect();
    if usable.len() < 3 {
        return Err(Error::Inconclusive(format!(
            "rate fit needs 3 schedule points with hits, found {}",
            usable.len()
        )));
    }
    let x: Vec<f64> = usable.iter().map(|e| (e.n as f64).ln()).collect();
    let y: Vec<f64> = usable.iter().map(|e| e.p_hat.ln()).collect();
    let w: Vec<f64> = usable.iter().map(|e| e.reps as f64 * e.p_hat / (1.0 - e.p_hat)).collect();
    let (slope, intercept, sxx) = weighted_line(&x, &y, &w);
    Ok(RateFit { slope, se: sxx.recip().sqrt(), intercept, used: usable.iter().map(|e| e.n).collect() })
}

/// Ordinary least squares for exactly known probabilities; `se` is the residual standard error of the slope.
pub fn rate_fit_exact(ns: &[usize], ps: &[f64]) -> Result<RateFit> {
    let pairs: Vec<(usize, f64)> = ns.iter().copied().zip(ps.iter().copied()).filter(|&(_, p)| p > 0.0).collect();
    if pairs.len() < 3 {
        return Err(Error::Inconclusive(format!("rate fit needs 3 positive points, found {}", pairs.len())));
    }
    let x: Vec<f64> = pairs.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let y: Vec<f64> = pairs.iter().map(|&(_, p)| p.ln()).collect();
    let w = vec![1.0; x.len()];
    let (slope, intercept, sxx) = weighted_line(&x, &y, &w);
    let rss: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let se = (rss / (x.len() as f64 - 2.0) / sxx).sqrt();
    Ok(RateFit { slope, se, intercept, used: pairs.iter().map(|&(n, _)| n).collect() })
}

fn ln_binomial_pmf(n: u64, k: u64, p: f64) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    let coeff = ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0);
    let a = if k == 0 { 0.0 } else { kf * p.ln() };
    let b = if k == n { 0.0 } else { (nf - kf) * (-p).ln_1p() };
    coeff + a + b
}

/// `P(Bin(n, p) ≥ k)`, summed in log space.
pub fn binomial_upper_tail(n: u64, p: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let logs: Vec<f64> = (k..=n).map(|j| ln_binomial_pmf(n, j, p)).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln()).exp().min(1.0)
}

/// `P(S_n/n ≥ r)` for a sum of `n` fair `±1` steps.
pub fn rademacher_tail(n: u64, r: f64) -> f64 {
    // S_n = 2K − n with K ~ Bin(n, 1/2)
    let need = (n as f64 * (1.0 + r) / 2.0 - 1e-9).ceil().max(0.0) as u64;
    binomial_upper_tail(n, 0.5, need)
}
