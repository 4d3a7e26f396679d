//! Penalty functionals `α` on a finite space and their tensorized form `α_n`.

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::ext::ExtReal;
use crate::loss::LossFn;
use crate::optim::{golden_min, min_norm_point, project_simplex};
use crate::space::{disintegrate, Dist, ProductDist};
use crate::transport;

/// Which `α` is in force.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum AlphaSpec {
    RelativeEntropy {
        mu: Dist,
    },
    LpEntropy {
        mu: Dist,
        p: f64,
    },
    Shortfall {
        mu: Dist,
        loss: LossFn,
    },
    /// Generators of a convex set of reference measures.
    Robust {
        set: Vec<Dist>,
    },
    /// Indicator of the convex hull of the generators.
    SetIndicator {
        set: Vec<Dist>,
    },
    Transport {
        mu: Dist,
        #[serde(with = "crate::ext::mat_f64")]
        cost: Vec<Vec<f64>>,
    },
}

impl AlphaSpec {
    /// Structural checks; call after deserializing untrusted input.
    pub fn validate(&self) -> Result<()> {
        match self {
            AlphaSpec::RelativeEntropy { .. } => Ok(()),
            AlphaSpec::LpEntropy { p, .. } => {
                if p.is_finite() && *p > 1.0 {
                    Ok(())
                } else {
                    input(format!("LpEntropy needs p > 1, got {p}"))
                }
            }
            AlphaSpec::Shortfall { loss, .. } => loss.validate(),
            AlphaSpec::Robust { set } | AlphaSpec::SetIndicator { set } => {
                let Some(first) = set.first() else {
                    return input("generator set is empty");
                };
                if set.iter().any(|d| d.len() != first.len()) {
                    return input("generators live on different spaces");
                }
                Ok(())
            }
            AlphaSpec::Transport { mu, cost } => {
                let m = mu.len();
                if cost.len() != m || cost.iter().any(|r| r.len() != m) {
                    return input(format!("cost matrix must be {m}×{m}"));
                }
                for (i, row) in cost.iter().enumerate() {
                    if row.iter().any(|&c| c.is_nan() || c < 0.0) {
                        return input(format!("cost row {i} has a negative or NaN entry"));
                    }
                    if row.iter().all(|c| c.is_infinite()) {
                        return input(format!("cost row {i} has no finite entry"));
                    }
                }
                Ok(())
            }
        }
    }

    /// Size of the underlying space.
    pub fn m(&self) -> usize {
        match self {
            AlphaSpec::RelativeEntropy { mu }
            | AlphaSpec::LpEntropy { mu, .. }
            | AlphaSpec::Shortfall { mu, .. }
            | AlphaSpec::Transport { mu, .. } => mu.len(),
            AlphaSpec::Robust { set } | AlphaSpec::SetIndicator { set } => set[0].len(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AlphaSpec::RelativeEntropy { .. } => "RelativeEntropy",
            AlphaSpec::LpEntropy { .. } => "LpEntropy",
            AlphaSpec::Shortfall { .. } => "Shortfall",
            AlphaSpec::Robust { .. } => "Robust",
            AlphaSpec::SetIndicator { .. } => "SetIndicator",
            AlphaSpec::Transport { .. } => "Transport",
        }
    }

    /// The loss for specs that are shortfall penalties (`LpEntropy` is one, with `q = p/(p−1)`).
    pub fn shortfall_loss(&self) -> Option<(&Dist, LossFn)> {
        match self {
            AlphaSpec::LpEntropy { mu, p } => Some((mu, LossFn::PowerPlus { q: p / (p - 1.0) })),
            AlphaSpec::Shortfall { mu, loss } => Some((mu, loss.clone())),
            _ => None,
        }
    }

    /// Points of the space where some measure with finite penalty can put mass.
    pub fn support(&self) -> Vec<usize> {
        match self {
            AlphaSpec::RelativeEntropy { mu } | AlphaSpec::LpEntropy { mu, .. } | AlphaSpec::Shortfall { mu, .. } => {
                mu.support()
            }
            AlphaSpec::Robust { set } | AlphaSpec::SetIndicator { set } => {
                (0..set[0].len()).filter(|&i| set.iter().any(|d| d.get(i) > 0.0)).collect()
            }
            AlphaSpec::Transport { .. } => (0..self.m()).collect(),
        }
    }

    /// `α(ν)`.
    pub fn alpha(&self, nu: &Dist) -> ExtReal {
        assert_eq!(nu.len(), self.m(), "measure on the wrong space");
        match self {
            AlphaSpec::RelativeEntropy { mu } => relative_entropy(nu, mu),
            AlphaSpec::LpEntropy { mu, p } => lp_entropy(nu, mu, *p),
            AlphaSpec::Shortfall { mu, loss } => shortfall_alpha(nu, mu, loss),
            AlphaSpec::Robust { set } => robust_alpha(nu, set),
            AlphaSpec::SetIndicator { set } => set_indicator_alpha(nu, set),
            AlphaSpec::Transport { mu, cost } => transport_alpha(nu, mu, cost),
        }
    }
}

/// `H(ν|μ) = Σ νᵢ log(νᵢ/μᵢ)`.
pub fn relative_entropy(nu: &Dist, mu: &Dist) -> ExtReal {
    let mut h = 0.0;
    for (&a, &b) in nu.weights().iter().zip(mu.weights()) {
        if a > 0.0 {
            if b == 0.0 {
                return ExtReal::INFINITY;
            }
            h += a * (a / b).ln();
        }
    }
    ExtReal::new(h.max(0.0))
}

/// `‖dν/dμ‖_{L^p(μ)} − 1`.
pub fn lp_entropy(nu: &Dist, mu: &Dist, p: f64) -> ExtReal {
    if !nu.abs_cont(mu) {
        return ExtReal::INFINITY;
    }
    let s: f64 = nu
        .weights()
        .iter()
        .zip(mu.weights())
        .filter(|(_, &b)| b > 0.0)
        .map(|(&a, &b)| b * (a / b).powf(p))
        .sum();
    ExtReal::new(s.powf(1.0 / p) - 1.0)
}

/// `inf_{t>0} (1/t)(1 + ∫ ℓ*(t dν/dμ) dμ)`, by golden section on `log t`.
pub fn shortfall_alpha(nu: &Dist, mu: &Dist, loss: &LossFn) -> ExtReal {
    if !nu.abs_cont(mu) {
        return ExtReal::INFINITY;
    }
    let pairs: Vec<(f64, f64)> = nu
        .weights()
        .iter()
        .zip(mu.weights())
        .filter(|(_, &b)| b > 0.0)
        .map(|(&a, &b)| (b, a / b))
        .collect();
    let objective = |s: f64| {
        let t = s.exp();
        let mut acc = 1.0;
        for &(w, r) in &pairs {
            acc += w * loss.conjugate(t * r);
        }
        acc / t
    };
    // bracket on a coarse grid of log t, then refine
    let (mut best_s, mut best_v) = (0.0, f64::INFINITY);
    for i in 0..=240 {
        let s = -30.0 + 0.25 * i as f64;
        let v = objective(s);
        if v < best_v {
            best_v = v;
            best_s = s;
        }
    }
    if best_v.is_infinite() {
        return ExtReal::INFINITY;
    }
    let (_, v) = golden_min(objective, best_s - 0.25, best_s + 0.25, 1e-11);
    ExtReal::new(v.min(best_v))
}

/// Mixture weights of the hull point minimizing `H(ν|·)`, and that minimum.
pub fn robust_alpha_weights(nu: &Dist, set: &[Dist]) -> (Vec<f64>, ExtReal) {
    let k = set.len();
    let support = nu.support();
    let value = |w: &[f64]| -> f64 {
        let mut h = 0.0;
        for &i in &support {
            let mi: f64 = set.iter().zip(w).map(|(d, &wj)| wj * d.get(i)).sum();
            if mi <= 0.0 {
                return f64::INFINITY;
            }
            h += nu.get(i) * (nu.get(i) / mi).ln();
        }
        h
    };
    let grad = |w: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; k];
        for &i in &support {
            let mi: f64 = set.iter().zip(w).map(|(d, &wj)| wj * d.get(i)).sum();
            for (gj, d) in g.iter_mut().zip(set) {
                *gj -= nu.get(i) * d.get(i) / mi;
            }
        }
        g
    };
    // start at the best vertex, or the barycentre when every vertex is infinite
    let vertex_vals: Vec<f64> = (0..k)
        .map(|j| {
            let mut e = vec![0.0; k];
            e[j] = 1.0;
            value(&e)
        })
        .collect();
    let best_vertex = (0..k).min_by(|&a, &b| vertex_vals[a].total_cmp(&vertex_vals[b])).unwrap();
    let mut w = vec![0.0; k];
    if vertex_vals[best_vertex].is_finite() {
        w[best_vertex] = 1.0;
    } else {
        w = vec![1.0 / k as f64; k];
    }
    let mut f = value(&w);
    if f.is_infinite() {
        return (w, ExtReal::INFINITY);
    }
    if k == 1 {
        return (w, ExtReal::new(f.max(0.0)));
    }
    let mut step: f64 = 1.0;
    for _ in 0..20_000 {
        let g = grad(&w);
        // projected-gradient stationarity measure
        let probe: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi - gi).collect();
        let proj = project_simplex(&probe);
        let gnorm = proj.iter().zip(&w).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if gnorm <= 1e-9 {
            break;
        }
        let mut accepted = false;
        step = (step * 2.0).min(1e6);
        while step > 1e-16 {
            let trial: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi - step * gi).collect();
            let cand = project_simplex(&trial);
            let fc = value(&cand);
            let decrease: f64 = g.iter().zip(cand.iter().zip(&w)).map(|(gi, (c, wi))| gi * (c - wi)).sum();
            let dist2: f64 = cand.iter().zip(&w).map(|(c, wi)| (c - wi) * (c - wi)).sum();
            if fc <= f + 0.5 * decrease.min(0.0) || (fc <= f && dist2 < 1e-30) {
                accepted = fc < f || dist2 > 0.0;
                w = cand;
                f = fc;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let best_vertex_val = vertex_vals[best_vertex];
    (w, ExtReal::new(f.min(best_vertex_val).max(0.0)))
}

/// `inf_{μ ∈ conv(M)} H(ν|μ)`.
pub fn robust_alpha(nu: &Dist, set: &[Dist]) -> ExtReal {
    robust_alpha_weights(nu, set).1
}

/// Euclidean distance from `ν` to `conv(M)`.
pub fn hull_distance(nu: &Dist, set: &[Dist]) -> f64 {
    let pts: Vec<Vec<f64>> = set
        .iter()
        .map(|d| d.weights().iter().zip(nu.weights()).map(|(a, b)| a - b).collect())
        .collect();
    let (_, x) = min_norm_point(&pts);
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `0` on `conv(M)` (Euclidean tolerance `1e−9`), `+∞` off it.
pub fn set_indicator_alpha(nu: &Dist, set: &[Dist]) -> ExtReal {
    if hull_distance(nu, set) <= 1e-9 {
        ExtReal::ZERO
    } else {
        ExtReal::INFINITY
    }
}

/// Optimal transport cost from `μ` to `ν`.
pub fn transport_alpha(nu: &Dist, mu: &Dist, cost: &[Vec<f64>]) -> ExtReal {
    ExtReal::new(transport::solve(mu.weights(), nu.weights(), cost).cost)
}

/// `α_n(ν) = ∫ Σ_k α(ν_{k−1,k}) dν`; zero-probability prefixes contribute nothing.
pub fn alpha_n(nu: &ProductDist, spec: &AlphaSpec) -> ExtReal {
    if nu.m() != spec.m() {
        return ExtReal::INFINITY;
    }
    let (first, kernels) = disintegrate(nu);
    let mut total = spec.alpha(&first);
    for (j, kernel) in kernels.iter().enumerate() {
        let mass = nu.prefix_marginal(j + 1);
        for (p, row) in kernel.rows().iter().enumerate() {
            if mass[p] > 0.0 {
                total = total + spec.alpha(row) * mass[p];
            }
        }
    }
    total
}
