//! Martingale deviation experiment: `P(S_n/n ≥ r)` against `exp(−n φ*(r))`
//! for increments with `E[e^{yΔ} | past] ≤ e^{φ(y)}`.
//!
//! Rare events are estimated by exponential tilting: each step law is tilted
//! by its own Chernoff parameter for the level `r`, and the likelihood ratio
//! is carried along the path.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_reps, stream};
use crate::error::{input, Result};
use crate::optim::{bisect_threshold, golden_max};

/// Upper clip for tilt parameters.
pub const THETA_MAX: f64 = 5.0;
/// Slack added to `−φ*(r)` in the comparison.
pub const AZUMA_SLACK: f64 = 0.1;

/// Law of one increment.
#[derive(Clone, Debug, PartialEq)]
pub enum StepLaw {
    Discrete { values: Vec<f64>, probs: Vec<f64> },
    /// Uniform on `[−1, 1]`.
    Uniform,
}

fn log_sinh_over(y: f64) -> f64 {
    let a = y.abs();
    if a < 1e-4 {
        a * a / 6.0
    } else {
        a + (-(-2.0 * a).exp()).ln_1p() - std::f64::consts::LN_2 - a.ln()
    }
}

fn log_cosh(y: f64) -> f64 {
    let a = y.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

impl StepLaw {
    pub fn log_mgf(&self, theta: f64) -> f64 {
        match self {
            StepLaw::Discrete { values, probs } => {
                let top = values.iter().map(|v| theta * v).fold(f64::NEG_INFINITY, f64::max);
                top + values.iter().zip(probs).map(|(v, p)| p * (theta * v - top).exp()).sum::<f64>().ln()
            }
            StepLaw::Uniform => log_sinh_over(theta),
        }
    }

    /// Mean of the law tilted by `e^{θx}`.
    pub fn tilted_mean(&self, theta: f64) -> f64 {
        match self {
            StepLaw::Discrete { values, probs } => {
                let top = values.iter().map(|v| theta * v).fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = values.iter().zip(probs).map(|(v, p)| p * (theta * v - top).exp()).collect();
                w.iter().zip(values).map(|(a, v)| a * v).sum::<f64>() / w.iter().sum::<f64>()
            }
            StepLaw::Uniform => {
                if theta.abs() < 1e-4 {
                    theta / 3.0
                } else {
                    1.0 / theta.tanh() - 1.0 / theta
                }
            }
        }
    }

    /// Tilt whose tilted mean is `r`, clipped to `[0, THETA_MAX]`.
    pub fn chernoff_tilt(&self, r: f64) -> f64 {
        if self.tilted_mean(0.0) >= r {
            return 0.0;
        }
        if self.tilted_mean(THETA_MAX) <= r {
            return THETA_MAX;
        }
        bisect_threshold(|t| self.tilted_mean(t) >= r, 0.0, THETA_MAX, |_| 1e-13)
    }
}

/// Step law with a fixed tilt, ready for sampling.
struct TiltedStep {
    theta: f64,
    log_mgf: f64,
    sampler: TiltedDraw,
}

enum TiltedDraw {
    Discrete { values: Vec<f64>, cum: Vec<f64> },
    Uniform { theta: f64 },
}

impl TiltedStep {
    fn new(law: &StepLaw, theta: f64) -> Self {
        let sampler = match law {
            StepLaw::Discrete { values, probs } => {
                let top = values.iter().map(|v| theta * v).fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = values.iter().zip(probs).map(|(v, p)| p * (theta * v - top).exp()).collect();
                let total: f64 = w.iter().sum();
                let mut acc = 0.0;
                let cum = w
                    .iter()
                    .map(|x| {
                        acc += x / total;
                        acc
                    })
                    .collect();
                TiltedDraw::Discrete { values: values.clone(), cum }
            }
            StepLaw::Uniform => TiltedDraw::Uniform { theta },
        };
        TiltedStep { theta, log_mgf: law.log_mgf(theta), sampler }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match &self.sampler {
            TiltedDraw::Discrete { values, cum } => {
                let i = cum.iter().position(|&c| u < c).unwrap_or(values.len() - 1);
                values[i]
            }
            TiltedDraw::Uniform { theta } => {
                if theta.abs() < 1e-12 {
                    2.0 * u - 1.0
                } else {
                    // inverse CDF of the density ∝ e^{θx} on [−1, 1]
                    let lo = (-theta).exp();
                    let hi = theta.exp();
                    (lo + u * (hi - lo)).ln() / theta
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IncrementFamily {
    /// I.i.d. fair `±1`, `φ(y) = log cosh y`.
    Rademacher,
    /// I.i.d. uniform on `[−1, 1]`, `φ(y) = log(sinh y / y)`.
    Uniform,
    /// Centered `[−1, 1]`-valued steps whose law depends on the sign of the
    /// running sum; `φ(y) = log cosh y`.
    Scripted,
}

impl IncrementFamily {
    pub fn phi(&self, y: f64) -> f64 {
        match self {
            IncrementFamily::Rademacher | IncrementFamily::Scripted => log_cosh(y),
            IncrementFamily::Uniform => log_sinh_over(y),
        }
    }

    /// `φ*(x) = sup_y (xy − φ(y))`, `+∞` beyond the increment range.
    pub fn phi_star(&self, x: f64) -> f64 {
        let x = x.abs();
        let obj = |y: f64| x * y - self.phi(y);
        const FAR: f64 = 1e3;
        if obj(FAR) - obj(0.5 * FAR) > 1e-6 * FAR {
            return f64::INFINITY;
        }
        golden_max(obj, 0.0, FAR, 1e-13).1.max(0.0)
    }

    /// Step laws and the selector by the running sum.
    pub fn laws(&self) -> Vec<StepLaw> {
        let fair = StepLaw::Discrete { values: vec![-1.0, 1.0], probs: vec![0.5, 0.5] };
        match self {
            IncrementFamily::Rademacher => vec![fair],
            IncrementFamily::Uniform => vec![StepLaw::Uniform],
            IncrementFamily::Scripted => vec![
                fair,
                StepLaw::Discrete { values: vec![1.0, -0.5], probs: vec![1.0 / 3.0, 2.0 / 3.0] },
                StepLaw::Discrete { values: vec![-1.0, 0.5], probs: vec![1.0 / 3.0, 2.0 / 3.0] },
            ],
        }
    }

    fn select(&self, s: f64) -> usize {
        match self {
            IncrementFamily::Scripted if s > 0.0 => 1,
            IncrementFamily::Scripted if s < 0.0 => 2,
            _ => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AzumaMethod {
    /// Direct sampling.
    Plain,
    /// Exponential tilting with likelihood-ratio weights.
    Tilted,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AzumaRow {
    pub n: usize,
    pub reps: usize,
    pub hits: usize,
    pub p_hat: f64,
    pub se: f64,
    /// `(1/n) log p̂`.
    #[serde(with = "crate::ext::serde_f64_field")]
    pub rate: f64,
    /// `−φ*(r) + slack`.
    #[serde(with = "crate::ext::serde_f64_field")]
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AzumaReport {
    pub family: IncrementFamily,
    pub method: AzumaMethod,
    pub r: f64,
    #[serde(with = "crate::ext::serde_f64_field")]
    pub phi_star: f64,
    pub slack: f64,
    pub tilts: Vec<f64>,
    pub rows: Vec<AzumaRow>,
}

impl AzumaReport {
    pub fn holds(&self) -> bool {
        self.rows.iter().all(|r| r.holds)
    }
}

/// Estimates `P(S_n/n ≥ r)` along `schedule` and compares `(1/n) log p̂`
/// with `−φ*(r) + 0.1`.
pub fn azuma_experiment(
    family: IncrementFamily,
    schedule: &[usize],
    r: f64,
    reps: usize,
    seed: u64,
    method: AzumaMethod,
) -> Result<AzumaReport> {
    check_reps(reps)?;
    if schedule.is_empty() || schedule.contains(&0) {
        return input("schedule must be a nonempty list of positive n");
    }
    let laws = family.laws();
    let steps: Vec<TiltedStep> = laws
        .iter()
        .map(|l| TiltedStep::new(l, if method == AzumaMethod::Tilted { l.chernoff_tilt(r) } else { 0.0 }))
        .collect();
    let phi_star = family.phi_star(r);
    let bound = -phi_star + AZUMA_SLACK;
    let rows = schedule
        .iter()
        .map(|&n| {
            let threshold = n as f64 * r;
            let weights: Vec<f64> = (0..reps as u64)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream(seed, i);
                    let (mut s, mut log_lr) = (0.0, 0.0);
                    for _ in 0..n {
                        let step = &steps[family.select(s)];
                        let d = step.sample(&mut rng);
                        log_lr += step.log_mgf - step.theta * d;
                        s += d;
                    }
                    if s >= threshold {
                        log_lr.exp()
                    } else {
                        0.0
                    }
                })
                .collect();
            let hits = weights.iter().filter(|&&w| w > 0.0).count();
            let mean = weights.iter().sum::<f64>() / reps as f64;
            let var = weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
            let rate = mean.ln() / n as f64;
            AzumaRow { n, reps, hits, p_hat: mean, se: (var / reps as f64).sqrt(), rate, bound, holds: rate <= bound }
        })
        .collect();
    Ok(AzumaReport {
        family,
        method,
        r,
        phi_star,
        slack: AZUMA_SLACK,
        tilts: steps.iter().map(|s| s.theta).collect(),
        rows,
    })
}
