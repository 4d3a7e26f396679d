//! The dual functional `ρ(f) = sup_ν (∫ f dν − α(ν))` on a finite space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alpha::AlphaSpec;
use crate::ext::{ext_sub, ExtReal};
use crate::loss::LossFn;
use crate::optim::{bisect_threshold, golden_max, golden_min, project_simplex};
use crate::space::Dist;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RhoMethod {
    ClosedForm,
    SimplexOpt,
    RootFind,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RhoResult {
    pub value: ExtReal,
    pub maximizer: Option<Dist>,
    pub method: RhoMethod,
    /// `closed form − value` when the generic path ran against a known closed form.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form_gap: Option<f64>,
}

/// `log Σ μᵢ e^{fᵢ}`, with a max-shift.
pub fn rho_entropy(f: &[f64], mu: &Dist) -> ExtReal {
    assert_eq!(f.len(), mu.len());
    let top = f
        .iter()
        .zip(mu.weights())
        .filter(|(_, &w)| w > 0.0)
        .map(|(&x, _)| x)
        .fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return ExtReal::new(top);
    }
    let s: f64 = f.iter().zip(mu.weights()).filter(|(_, &w)| w > 0.0).map(|(&x, &w)| w * (x - top).exp()).sum();
    ExtReal::new(top + s.ln())
}

/// `inf{m : ∫ ℓ(f − m) dμ ≤ 1}` by bisection.
pub fn rho_shortfall(f: &[f64], mu: &Dist, loss: &LossFn) -> ExtReal {
    assert_eq!(f.len(), mu.len());
    let pts: Vec<(f64, f64)> = f.iter().zip(mu.weights()).filter(|(_, &w)| w > 0.0).map(|(&x, &w)| (x, w)).collect();
    if pts.iter().any(|&(x, _)| x == f64::INFINITY) {
        return ExtReal::INFINITY;
    }
    let finite: Vec<f64> = pts.iter().map(|p| p.0).filter(|x| x.is_finite()).collect();
    if finite.is_empty() {
        return if loss.left_limit() <= 1.0 { ExtReal::NEG_INFINITY } else { ExtReal::INFINITY };
    }
    let lim = loss.left_limit();
    let g = |m: f64| -> f64 {
        pts.iter().map(|&(x, w)| w * if x == f64::NEG_INFINITY { lim } else { loss.eval(x - m) }).sum()
    };
    let fmax = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let fmin = finite.iter().copied().fold(f64::INFINITY, f64::min);

    let mut hi = fmax + 1.0;
    let mut step = 1.0;
    while g(hi) > 1.0 {
        hi += step;
        step *= 2.0;
        if step > 1e300 {
            return ExtReal::INFINITY;
        }
    }
    let mut lo = fmin - 1.0;
    step = 1.0;
    while g(lo) <= 1.0 {
        hi = lo;
        lo -= step;
        step *= 2.0;
        if step > 1e300 {
            return ExtReal::NEG_INFINITY;
        }
    }
    // run to adjacent floats
    ExtReal::new(bisect_threshold(|m| g(m) <= 1.0, lo, hi, |_| 0.0))
}

/// Convex function `φ*` defining an optimized certainty equivalent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum OceFn {
    /// `φ*(x) = eˣ − 1`.
    ExpMinusOne,
    /// `φ*(x) = x⁺`.
    StopLoss,
}

impl OceFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            OceFn::ExpMinusOne => x.exp() - 1.0,
            OceFn::StopLoss => x.max(0.0),
        }
    }

    fn right_deriv(&self, x: f64) -> f64 {
        match self {
            OceFn::ExpMinusOne => x.exp(),
            OceFn::StopLoss => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `inf_m (∫ φ*(f − m) dμ + m)`, golden section on a bracket found from the slopes.
pub fn rho_oce(f: &[f64], mu: &Dist, phi: &OceFn) -> ExtReal {
    assert_eq!(f.len(), mu.len());
    let pts: Vec<(f64, f64)> = f.iter().zip(mu.weights()).filter(|(_, &w)| w > 0.0).map(|(&x, &w)| (x, w)).collect();
    if pts.iter().any(|&(x, _)| x == f64::INFINITY) {
        return ExtReal::INFINITY;
    }
    let finite: Vec<f64> = pts.iter().map(|p| p.0).filter(|x| x.is_finite()).collect();
    let objective = |m: f64| -> f64 {
        m + pts.iter().map(|&(x, w)| w * phi.eval(x - m)).sum::<f64>()
    };
    let slope = |m: f64| -> f64 { 1.0 - pts.iter().map(|&(x, w)| w * phi.right_deriv(x - m)).sum::<f64>() };
    let (fmin, fmax) = if finite.is_empty() {
        (0.0, 0.0)
    } else {
        (finite.iter().copied().fold(f64::INFINITY, f64::min), finite.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    };
    let mut lo = fmin - 1.0;
    let mut step = 1.0;
    while slope(lo) > 0.0 {
        lo -= step;
        step *= 2.0;
        if step > 1e12 {
            log::warn!("OCE objective is unbounded below as m → −∞");
            return ExtReal::NEG_INFINITY;
        }
    }
    let mut hi = fmax + 1.0;
    step = 1.0;
    while slope(hi) < 0.0 {
        hi += step;
        step *= 2.0;
        if step > 1e12 {
            log::warn!("OCE objective is unbounded below as m → +∞");
            return ExtReal::NEG_INFINITY;
        }
    }
    let (_, v) = golden_min(objective, lo, hi, 1e-12 * (1.0 + lo.abs().max(hi.abs())));
    ExtReal::new(v)
}

/// `max_{μ ∈ M} log ∫ e^f dμ`.
pub fn rho_robust(f: &[f64], set: &[Dist]) -> ExtReal {
    set.iter().map(|mu| rho_entropy(f, mu)).fold(ExtReal::NEG_INFINITY, ExtReal::max)
}

/// `max_{μ ∈ M} ∫ f dμ`.
pub fn rho_set_indicator(f: &[f64], set: &[Dist]) -> ExtReal {
    set.iter().map(|mu| ExtReal::new(mu.integrate(f))).fold(ExtReal::NEG_INFINITY, ExtReal::max)
}

fn best_response(f: &[f64], row: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (y, (&fy, &c)) in f.iter().zip(row).enumerate() {
        let v = ext_sub(fy, c);
        if v > best.1 {
            best = (y, v);
        }
    }
    best
}

/// `Σ_x μ(x) max_y (f(y) − c(x, y))`.
pub fn rho_transport(f: &[f64], mu: &Dist, cost: &[Vec<f64>]) -> ExtReal {
    let r: Vec<f64> = cost.iter().map(|row| best_response(f, row).1).collect();
    ExtReal::new(mu.integrate(&r))
}

fn gibbs(f: &[f64], mu: &Dist) -> Option<Dist> {
    let top = f.iter().zip(mu.weights()).filter(|(_, &w)| w > 0.0).map(|(&x, _)| x).fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return None;
    }
    Dist::from_unnormalized(f.iter().zip(mu.weights()).map(|(&x, &w)| if w > 0.0 { w * (x - top).exp() } else { 0.0 }).collect()).ok()
}

impl AlphaSpec {
    /// `ρ(f)` by the closed form or scalar root find for this spec.
    pub fn rho(&self, f: &[f64]) -> ExtReal {
        match self {
            AlphaSpec::RelativeEntropy { mu } => rho_entropy(f, mu),
            AlphaSpec::LpEntropy { .. } | AlphaSpec::Shortfall { .. } => {
                let (mu, loss) = self.shortfall_loss().unwrap();
                rho_shortfall(f, mu, &loss)
            }
            AlphaSpec::Robust { set } => rho_robust(f, set),
            AlphaSpec::SetIndicator { set } => rho_set_indicator(f, set),
            AlphaSpec::Transport { mu, cost } => rho_transport(f, mu, cost),
        }
    }

    pub fn rho_method(&self) -> RhoMethod {
        match self {
            AlphaSpec::LpEntropy { .. } | AlphaSpec::Shortfall { .. } => RhoMethod::RootFind,
            _ => RhoMethod::ClosedForm,
        }
    }

    /// `ρ(f)` together with a measure attaining the supremum, when one is
    /// available from the closed form.
    pub fn rho_with_maximizer(&self, f: &[f64]) -> (ExtReal, Option<Dist>) {
        let value = self.rho(f);
        if !value.is_finite() {
            return (value, None);
        }
        let nu = match self {
            AlphaSpec::RelativeEntropy { mu } => gibbs(f, mu),
            AlphaSpec::LpEntropy { .. } | AlphaSpec::Shortfall { .. } => {
                let (mu, loss) = self.shortfall_loss().unwrap();
                let m = value.value();
                let w: Vec<f64> = f
                    .iter()
                    .zip(mu.weights())
                    .map(|(&x, &w)| if w > 0.0 && x.is_finite() { w * loss.deriv(x - m) } else { 0.0 })
                    .collect();
                Dist::from_unnormalized(w).ok()
            }
            AlphaSpec::Robust { set } => {
                let best = set.iter().max_by(|a, b| rho_entropy(f, a).total_cmp(&rho_entropy(f, b))).unwrap();
                gibbs(f, best)
            }
            AlphaSpec::SetIndicator { set } => set.iter().max_by(|a, b| a.integrate(f).total_cmp(&b.integrate(f))).cloned(),
            AlphaSpec::Transport { mu, cost } => {
                let mut w = vec![0.0; mu.len()];
                for (x, row) in cost.iter().enumerate() {
                    w[best_response(f, row).0] += mu.get(x);
                }
                Dist::from_unnormalized(w).ok()
            }
        };
        (value, nu)
    }

    /// Closed-form / root-find evaluation packaged as a [`RhoResult`].
    pub fn evaluate(&self, f: &[f64]) -> RhoResult {
        let (value, maximizer) = self.rho_with_maximizer(f);
        RhoResult { value, maximizer, method: self.rho_method(), closed_form_gap: None }
    }
}

/// Options for [`rho_generic`].
#[derive(Clone, Copy, Debug)]
pub struct GenericOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
}

impl Default for GenericOptions {
    fn default() -> Self {
        GenericOptions { restarts: 200, seed: 0, max_iter: 500 }
    }
}

fn dirichlet_one(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Projected gradient ascent of a function on the simplex, with
/// finite-difference directional derivatives toward the vertices.
fn ascend(obj: &dyn Fn(&[f64]) -> f64, start: Vec<f64>, max_iter: usize) -> (Vec<f64>, f64) {
    let k = start.len();
    let mut p = start;
    let mut v = obj(&p);
    if k == 1 || v == f64::NEG_INFINITY {
        return (p, v);
    }
    let h = 1e-7;
    let mut step = 0.1;
    for _ in 0..max_iter {
        let mut g = vec![0.0; k];
        for (i, gi) in g.iter_mut().enumerate() {
            let fwd: Vec<f64> = (0..k).map(|j| p[j] + h * ((i == j) as u8 as f64 - p[j])).collect();
            let bwd: Vec<f64> = (0..k).map(|j| p[j] - h * ((i == j) as u8 as f64 - p[j])).collect();
            let vf = obj(&fwd);
            *gi = if bwd.iter().all(|&x| x >= 0.0) {
                let vb = obj(&bwd);
                if vb.is_finite() && vf.is_finite() {
                    (vf - vb) / (2.0 * h)
                } else {
                    (vf - v) / h
                }
            } else {
                (vf - v) / h
            };
            if !gi.is_finite() {
                *gi = if *gi > 0.0 { 1e6 } else { -1e6 };
            }
        }
        let mut moved = false;
        step = (step * 2.0f64).min(1e3);
        while step > 1e-14 {
            let trial: Vec<f64> = p.iter().zip(&g).map(|(a, b)| a + step * b).collect();
            let cand = project_simplex(&trial);
            let vc = obj(&cand);
            let lin: f64 = g.iter().zip(cand.iter().zip(&p)).map(|(gi, (c, pi))| gi * (c - pi)).sum();
            if vc >= v + 1e-4 * lin && vc > v {
                let delta: f64 = cand.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
                let gain = vc - v;
                p = cand;
                v = vc;
                moved = delta > 1e-14 && gain > 1e-16 * (1.0 + v.abs());
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (p, v)
}

/// Map from optimizer coordinates to a law on `E`.
type Embedding = Box<dyn Fn(&[f64]) -> Dist>;

/// Maximize `ν ↦ ∫ f dν − α(ν)` over the simplex with random restarts, and
/// compare against the closed form.
pub fn rho_generic(f: &[f64], spec: &AlphaSpec, opts: GenericOptions) -> RhoResult {
    let m = spec.m();
    assert_eq!(f.len(), m);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    // parameter simplex and its embedding into P(E)
    let (dim, embed): (usize, Embedding) = match spec {
        AlphaSpec::SetIndicator { set } => {
            let set = set.clone();
            (set.len(), Box::new(move |w: &[f64]| {
                let refs: Vec<&Dist> = set.iter().collect();
                Dist::mixture(&refs, w).expect("hull point")
            }))
        }
        _ => {
            let support = spec.support();
            (support.len(), Box::new(move |w: &[f64]| {
                let mut full = vec![0.0; m];
                for (&i, &wi) in support.iter().zip(w) {
                    full[i] = wi;
                }
                Dist::from_unnormalized(full).expect("simplex point")
            }))
        }
    };
    let objective = |w: &[f64]| -> f64 {
        let nu = embed(w);
        let a = match spec {
            AlphaSpec::SetIndicator { .. } => ExtReal::ZERO,
            _ => spec.alpha(&nu),
        };
        ext_sub(nu.integrate(f), a.value())
    };

    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(opts.restarts + dim);
    match spec {
        AlphaSpec::SetIndicator { .. } | AlphaSpec::Robust { .. } => {
            starts.push(vec![1.0 / dim as f64; dim]);
        }
        AlphaSpec::RelativeEntropy { mu } | AlphaSpec::LpEntropy { mu, .. } | AlphaSpec::Shortfall { mu, .. } | AlphaSpec::Transport { mu, .. } => {
            starts.push(spec.support().iter().map(|&i| mu.get(i)).collect());
        }
    }
    if let AlphaSpec::SetIndicator { .. } = spec {
        for j in 0..dim {
            let mut e = vec![0.0; dim];
            e[j] = 1.0;
            starts.push(e);
        }
    }
    while starts.len() < opts.restarts.max(1) {
        starts.push(dirichlet_one(&mut rng, dim));
    }

    let (mut best_w, mut best_v) = (starts[0].clone(), f64::NEG_INFINITY);
    for s in starts {
        let (w, v) = ascend(&objective, s, opts.max_iter);
        if v > best_v {
            best_v = v;
            best_w = w;
        }
    }
    let closed = spec.rho(f);
    let gap = if closed.is_finite() && best_v.is_finite() { Some(closed.value() - best_v) } else { None };
    RhoResult {
        value: ExtReal::new(best_v),
        maximizer: if best_v.is_finite() { Some(embed(&best_w)) } else { None },
        method: RhoMethod::SimplexOpt,
        closed_form_gap: gap,
    }
}

/// Lower approximation of `α(ν) = sup_f (∫ f dν − ρ(f))` over the box `[−B, B]^m`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConjugateEstimate {
    pub value: ExtReal,
    pub direct: ExtReal,
    /// `direct − value`.
    pub gap: ExtReal,
    pub argmax: Vec<f64>,
}

/// Grid search over `f ∈ [−B, B]^m` with `f_0 = 0` (translation invariance),
/// spacing `h`, then coordinate ascent by golden section.
pub fn conjugate_alpha(nu: &Dist, spec: &AlphaSpec, bound: f64, h: f64) -> ConjugateEstimate {
    let m = spec.m();
    let psi = |f: &[f64]| -> f64 { ext_sub(nu.integrate(f), spec.rho(f).value()) };
    let steps = ((2.0 * bound / h).round() as usize).max(1);
    let mut best = vec![0.0; m];
    let mut best_v = psi(&best);
    if m > 1 {
        let per_axis = steps + 1;
        let total = per_axis.pow((m - 1) as u32);
        let stride = (total / 200_000).max(1);
        let mut idx = 0;
        while idx < total {
            let mut f = vec![0.0; m];
            let mut r = idx;
            for fj in f.iter_mut().skip(1) {
                *fj = -bound + 2.0 * bound * (r % per_axis) as f64 / steps as f64;
                r /= per_axis;
            }
            let v = psi(&f);
            if v > best_v {
                best_v = v;
                best = f;
            }
            idx += stride;
        }
        for _ in 0..200 {
            let before = best_v;
            for j in 1..m {
                let base = best.clone();
                let (x, v) = golden_max(
                    |t| {
                        let mut trial = base.clone();
                        trial[j] = t;
                        psi(&trial)
                    },
                    -bound,
                    bound,
                    1e-10,
                );
                if v > best_v {
                    best_v = v;
                    best[j] = x;
                }
            }
            if best_v - before <= 1e-13 {
                break;
            }
        }
    }
    let direct = spec.alpha(nu);
    ConjugateEstimate { value: ExtReal::new(best_v), direct, gap: direct - ExtReal::new(best_v), argmax: best }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn d(w: &[f64]) -> Dist {
        Dist::new(w.to_vec()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        let mu = d(&[0.5, 0.5]);
        assert_abs_diff_eq!(rho_entropy(&[1.3, 1.3], &mu).value(), 1.3, epsilon = 1e-15);
        assert_abs_diff_eq!(rho_entropy(&[0.0, 3f64.ln()], &mu).value(), 2f64.ln(), epsilon = 1e-15);
        let mu3 = d(&[0.2, 0.3, 0.5]);
        let ind = [0.0, f64::NEG_INFINITY, 0.0];
        assert_abs_diff_eq!(rho_entropy(&ind, &mu3).value(), 0.7f64.ln(), epsilon = 1e-15);
        assert!(rho_entropy(&[f64::NEG_INFINITY; 3], &mu3).is_neg_inf());
    }

    #[test]
    fn shortfall_examples() {
        let mu = d(&[0.5, 0.5]);
        let v = rho_shortfall(&[0.0, 1.0], &mu, &LossFn::PowerPlus { q: 2.0 }).value();
        // 0.5[(1−m)² + (2−m)²] = 1 with m < 1: m = (3 − √3)/2
        assert_abs_diff_eq!(v, (3.0 - 3f64.sqrt()) / 2.0, epsilon = 1e-9);
        let f = [0.3, -1.2];
        assert_abs_diff_eq!(
            rho_shortfall(&f, &mu, &LossFn::Exp).value(),
            rho_entropy(&f, &mu).value(),
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(rho_shortfall(&[2.5, 2.5], &mu, &LossFn::PowerPlus { q: 3.0 }).value(), 2.5, epsilon = 1e-9);
    }

    #[test]
    fn oce_examples() {
        let mu = d(&[0.25, 0.75]);
        let f = [0.4, -0.9];
        assert_abs_diff_eq!(
            rho_oce(&f, &mu, &OceFn::ExpMinusOne).value(),
            rho_entropy(&f, &mu).value(),
            epsilon = 1e-9
        );
        let stop = rho_oce(&[0.0, 1.0], &d(&[0.5, 0.5]), &OceFn::StopLoss).value();
        assert_abs_diff_eq!(stop, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn transport_examples() {
        let mu = d(&[0.3, 0.7]);
        let f = [0.2, -0.4];
        assert_abs_diff_eq!(rho_transport(&f, &mu, &[vec![0.0; 2], vec![0.0; 2]]).value(), 0.2, epsilon = 1e-15);
        let inf = f64::INFINITY;
        assert_abs_diff_eq!(
            rho_transport(&f, &mu, &[vec![0.0, inf], vec![inf, 0.0]]).value(),
            mu.integrate(&f),
            epsilon = 1e-15
        );
    }

    #[test]
    fn maximizers_attain_the_value() {
        let mu = d(&[0.2, 0.5, 0.3]);
        let f = [0.4, -0.2, 1.1];
        let specs = vec![
            AlphaSpec::RelativeEntropy { mu: mu.clone() },
            AlphaSpec::LpEntropy { mu: mu.clone(), p: 2.0 },
            AlphaSpec::Shortfall { mu: mu.clone(), loss: LossFn::PowerPlus { q: 3.0 } },
            AlphaSpec::Robust { set: vec![mu.clone(), d(&[0.6, 0.2, 0.2])] },
            AlphaSpec::SetIndicator { set: vec![mu.clone(), d(&[0.6, 0.2, 0.2])] },
            AlphaSpec::Transport {
                mu: mu.clone(),
                cost: vec![vec![0.0, 0.5, 1.0], vec![0.5, 0.0, 0.5], vec![1.0, 0.5, 0.0]],
            },
        ];
        for spec in specs {
            let (v, nu) = spec.rho_with_maximizer(&f);
            let nu = nu.unwrap();
            let achieved = nu.integrate(&f) - spec.alpha(&nu).value();
            assert_abs_diff_eq!(achieved, v.value(), epsilon = 1e-8);
        }
    }

    #[test]
    fn generic_matches_closed_form_for_entropy() {
        let spec = AlphaSpec::RelativeEntropy { mu: d(&[0.1, 0.2, 0.3, 0.4]) };
        let r = rho_generic(&[0.5, -1.0, 2.0, 0.0], &spec, GenericOptions { restarts: 10, ..Default::default() });
        assert!(r.closed_form_gap.unwrap().abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn conjugate_recovers_entropy_at_mu() {
        let mu = d(&[0.3, 0.3, 0.4]);
        let spec = AlphaSpec::RelativeEntropy { mu: mu.clone() };
        let est = conjugate_alpha(&mu, &spec, 6.0, 0.5);
        assert!(est.value.value().abs() < 1e-3);
    }
}
