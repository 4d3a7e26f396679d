//! The tensorized functional `ρ_n` by backward recursion
//! `ρ_n(f) = ρ_{n−1}(x ↦ ρ(f(x, ·)))`, its type-class acceleration, the
//! Sanov-limit harness, superhedging certificates and the transport control
//! problem.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::Serialize;

use crate::alpha::{alpha_n, transport_alpha, AlphaSpec};
use crate::error::{input, Error, Result};
use crate::ext::{ext_add, ext_sub, weight_mul, ExtReal};
use crate::optim::{golden_max, simplex_maximize};
use crate::rho::rho_entropy;
use crate::space::{compose, dense_size, ln_multinomial, Dist, Kernel, ProductDist, RealFieldN, Repr, TypeIndex};

/// Value fields of the backward recursion: `stages[k]` is `g_k` on `E^k`,
/// with `g_n = f` and `g_0 = [ρ_n(f)]`.
#[derive(Clone, Debug, Serialize)]
pub struct DPTrace {
    pub n: usize,
    pub m: usize,
    pub spec: AlphaSpec,
    #[serde(serialize_with = "ser_stages")]
    pub stages: Vec<Vec<f64>>,
}

fn ser_stages<S: serde::Serializer>(v: &[Vec<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    crate::ext::mat_f64::serialize(v, s)
}

fn check_spec(spec: &AlphaSpec, m: usize) -> Result<()> {
    spec.validate()?;
    if spec.m() != m {
        return input(format!("field lives on {m} points but the penalty on {}", spec.m()));
    }
    Ok(())
}

fn dense_of(f: &RealFieldN) -> Result<Vec<f64>> {
    match f.repr() {
        Repr::Dense(v) => Ok(v.clone()),
        Repr::Symmetric { .. } => Ok(f.to_dense()?.dense_values().unwrap().to_vec()),
    }
}

/// One backward step: apply `ρ` to every contiguous slice of length `m`.
fn backward_step(g: &[f64], m: usize, spec: &AlphaSpec) -> Vec<f64> {
    g.par_chunks(m).map(|slice| spec.rho(slice).value()).collect()
}

/// `ρ_n(f)` on a dense field, with the full trace.
pub fn rho_n_dense(f: &RealFieldN, spec: &AlphaSpec) -> Result<(ExtReal, DPTrace)> {
    let (n, m) = (f.n(), f.m());
    check_spec(spec, m)?;
    dense_size(m, n)?;
    let mut stages = vec![Vec::new(); n + 1];
    stages[n] = dense_of(f)?;
    for k in (0..n).rev() {
        stages[k] = backward_step(&stages[k + 1], m, spec);
    }
    let value = ExtReal::new(stages[0][0]);
    Ok((value, DPTrace { n, m, spec: spec.clone(), stages }))
}

impl DPTrace {
    pub fn value(&self) -> ExtReal {
        ExtReal::new(self.stages[0][0])
    }

    /// Joint law assembled from the slice-wise maximizers of the trace.
    ///
    /// Slices without a maximizer (infinite value) fall back to uniform.
    pub fn implied_optimizer(&self) -> Result<ProductDist> {
        let m = self.m;
        let pick = |slice: &[f64]| self.spec.rho_with_maximizer(slice).1.unwrap_or_else(|| Dist::uniform(m));
        let first = pick(&self.stages[1]);
        let mut kernels = Vec::with_capacity(self.n.saturating_sub(1));
        for k in 2..=self.n {
            let rows: Vec<Dist> = self.stages[k].par_chunks(m).map(pick).collect();
            kernels.push(Kernel::new(k, m, rows)?);
        }
        compose(&first, &kernels)
    }
}

/// Two-sided comparison of the recursion with the defining supremum
/// `sup_ν (∫ f dν − α_n(ν))` over `P(E^n)`.
#[derive(Clone, Debug, Serialize)]
pub struct BruteForceReport {
    pub dp_value: f64,
    /// Largest `∫ f dν − α_n(ν)` over the random draws.
    pub max_sampled: f64,
    /// `∫ f dν* − α_n(ν*)` for the trace's implied optimizer.
    pub achieved: f64,
    pub draws: usize,
}

impl BruteForceReport {
    /// Does the recursion sit within `tol` of the supremum from both sides?
    pub fn agrees(&self, tol: f64) -> bool {
        self.max_sampled <= self.dp_value + tol && (self.achieved - self.dp_value).abs() <= tol
    }
}

/// Sample `draws` Dirichlet(1) laws on `E^n` and compare with the recursion.
pub fn brute_force_check(f: &RealFieldN, spec: &AlphaSpec, draws: usize, seed: u64) -> Result<BruteForceReport> {
    let (dp, trace) = rho_n_dense(f, spec)?;
    let fv = trace.stages[f.n()].clone();
    let size = fv.len();
    let (n, m) = (f.n(), f.m());
    let gamma = Gamma::new(1.0, 1.0).expect("valid gamma");
    let max_sampled = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let w: Vec<f64> = (0..size).map(|_| gamma.sample(&mut rng)).collect();
            let s: f64 = w.iter().sum();
            let nu = ProductDist::new(n, m, w.into_iter().map(|x| x / s).collect()).expect("normalized");
            ext_sub(nu.integrate(&fv), alpha_n(&nu, spec).value())
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    let star = trace.implied_optimizer()?;
    let achieved = ext_sub(star.integrate(&fv), alpha_n(&star, spec).value());
    Ok(BruteForceReport { dp_value: dp.value(), max_sampled, achieved, draws })
}

/// `sup` of `log ∫ e^f dP` over two-stage laws whose first marginal and
/// kernels are generators of `M`; exact because the objective is maximized at
/// vertices stage by stage.
pub fn robust_enumeration_n2(f: &RealFieldN, set: &[Dist]) -> Result<ExtReal> {
    if f.n() != 2 {
        return input("enumeration is implemented for n = 2");
    }
    let m = f.m();
    let fv = dense_of(f)?;
    let k = set.len();
    let total = k.checked_pow(m as u32 + 1).ok_or_else(|| Error::Input("too many kernel choices".into()))?;
    let mut best = ExtReal::NEG_INFINITY;
    for code in 0..total {
        let mut r = code;
        let first = &set[r % k];
        r /= k;
        let mut joint = vec![0.0; m * m];
        for x in 0..m {
            let row = &set[r % k];
            r /= k;
            for y in 0..m {
                joint[x * m + y] = first.get(x) * row.get(y);
            }
        }
        let nu = Dist::new(joint)?;
        best = best.max(rho_entropy(&fv, &nu));
    }
    Ok(best)
}

/// `ρ_n(f)` for a permutation-invariant field by recursion on the occupancy
/// vector of the consumed prefix.
pub fn rho_n_symmetric(f: &RealFieldN, spec: &AlphaSpec) -> Result<ExtReal> {
    let (n, m) = (f.n(), f.m());
    check_spec(spec, m)?;
    let (classes, values) = match f.repr() {
        Repr::Symmetric { classes, values } => (classes.clone(), values.clone()),
        Repr::Dense(_) => match f.to_symmetric()?.repr() {
            Repr::Symmetric { classes, values } => (classes.clone(), values.clone()),
            Repr::Dense(_) => unreachable!(),
        },
    };
    let mut next_index = TypeIndex::new(n, m);
    debug_assert_eq!(next_index.classes(), classes.as_slice());
    let mut next = values;
    for k in (0..n).rev() {
        let index = TypeIndex::new(k, m);
        let cur: Vec<f64> = index
            .classes()
            .par_iter()
            .map(|c| {
                let mut key = c.clone();
                let slice: Vec<f64> = (0..m)
                    .map(|y| {
                        key[y] += 1;
                        let v = next[next_index.index(&key).expect("successor class")];
                        key[y] -= 1;
                        v
                    })
                    .collect();
                spec.rho(&slice).value()
            })
            .collect();
        next = cur;
        next_index = index;
    }
    Ok(ExtReal::new(next[0]))
}

/// Values `v_n = (1/n) ρ_n(n F ∘ L_n)` along a schedule against the target
/// `sup_ν (F(ν) − α(ν))`.
#[derive(Clone, Debug, Serialize)]
pub struct SanovRun {
    pub spec: String,
    pub schedule: Vec<usize>,
    #[serde(with = "crate::ext::vec_f64")]
    pub values: Vec<f64>,
    #[serde(with = "crate::ext::serde_f64_field")]
    pub target: f64,
    pub target_argmax: Vec<f64>,
    /// `|v_n − target|`.
    #[serde(with = "crate::ext::vec_f64")]
    pub gaps: Vec<f64>,
    /// Target recomputed over couplings `π ∈ Π(μ)` (transport runs only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling_target: Option<f64>,
}

impl SanovRun {
    /// Rows `(n, v_n, target, gap)`.
    pub fn rows(&self) -> Vec<(usize, f64, f64, f64)> {
        self.schedule
            .iter()
            .zip(self.values.iter().zip(&self.gaps))
            .map(|(&n, (&v, &g))| (n, v, self.target, g))
            .collect()
    }
}

/// `(1/n) ρ_n(n F ∘ L_n)`.
pub fn sanov_value(big_f: &(dyn Fn(&[f64]) -> f64 + Sync), spec: &AlphaSpec, n: usize) -> Result<f64> {
    let field = RealFieldN::from_empirical_functional(n, spec.m(), big_f)?;
    Ok(rho_n_symmetric(&field, spec)?.value() / n as f64)
}

/// `sup_ν (F(ν) − α(ν))` by a simplex grid of spacing `1/100` plus pattern
/// search; for `SetIndicator` the search runs over hull weights.
pub fn sanov_target(big_f: &dyn Fn(&[f64]) -> f64, spec: &AlphaSpec) -> (f64, Vec<f64>) {
    match spec {
        AlphaSpec::SetIndicator { set } => {
            let refs: Vec<&Dist> = set.iter().collect();
            let mix = |w: &[f64]| Dist::mixture(&refs, w).expect("hull point");
            let (w, v) = simplex_maximize(|w| big_f(mix(w).weights()), set.len(), 100, 1e-10);
            (v, mix(&w).weights().to_vec())
        }
        _ => {
            let obj = |nu: &[f64]| {
                let d = Dist::from_unnormalized(nu.to_vec()).expect("simplex point");
                ext_sub(big_f(nu), spec.alpha(&d).value())
            };
            let (nu, v) = simplex_maximize(obj, spec.m(), 100, 1e-10);
            (v, nu)
        }
    }
}

pub fn sanov_limit(big_f: &(dyn Fn(&[f64]) -> f64 + Sync), spec: &AlphaSpec, schedule: &[usize]) -> Result<SanovRun> {
    spec.validate()?;
    if schedule.is_empty() || schedule.contains(&0) {
        return input("schedule must be a nonempty list of positive n");
    }
    let values = schedule.iter().map(|&n| sanov_value(big_f, spec, n)).collect::<Result<Vec<f64>>>()?;
    let (target, argmax) = sanov_target(big_f, spec);
    let gaps = values.iter().map(|v| (v - target).abs()).collect();
    Ok(SanovRun {
        spec: spec.name().to_string(),
        schedule: schedule.to_vec(),
        values,
        target,
        target_argmax: argmax,
        gaps,
        coupling_target: None,
    })
}

/// `E_{ν^n}[F(L_n)] − α(ν)`, the finite-`n` lower bound for `v_n` at a fixed `ν`.
pub fn sanov_lower_bound_at(big_f: &dyn Fn(&[f64]) -> f64, spec: &AlphaSpec, nu: &Dist, n: usize) -> f64 {
    let m = spec.m();
    let mut expectation = 0.0;
    for c in crate::space::compositions(n, m) {
        let mut logw = ln_multinomial(&c);
        for (i, &ci) in c.iter().enumerate() {
            if ci > 0 {
                logw += ci as f64 * nu.get(i).ln();
            }
        }
        let w = logw.exp();
        if w > 0.0 {
            let l: Vec<f64> = c.iter().map(|&ci| ci as f64 / n as f64).collect();
            expectation += w * big_f(&l);
        }
    }
    ext_sub(expectation, spec.alpha(nu).value())
}

/// Superhedging decomposition `f = y + Σ_k Y_k` with every slice acceptable.
#[derive(Clone, Debug, Serialize)]
pub struct SuperhedgeCert {
    pub y: f64,
    /// `increments[k−1]` is `Y_k` on `E^k`.
    pub increments: Vec<Vec<f64>>,
    /// `max |f − y − Σ Y_k|`.
    pub residual: f64,
    /// `max |ρ(Y_k(x_1..x_{k−1}, ·))|` over all slices.
    pub max_slice_rho: f64,
}

pub fn superhedge(f: &RealFieldN, spec: &AlphaSpec) -> Result<SuperhedgeCert> {
    let (_, trace) = rho_n_dense(f, spec)?;
    let (n, m) = (trace.n, trace.m);
    let fv = &trace.stages[n];
    if trace.stages.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("superhedging needs finite values at every stage".into()));
    }
    let y = trace.stages[0][0];
    let increments: Vec<Vec<f64>> = (1..=n)
        .map(|k| {
            let prev = &trace.stages[k - 1];
            trace.stages[k].iter().enumerate().map(|(i, &g)| g - prev[i / m]).collect()
        })
        .collect();
    let mut residual = 0.0f64;
    for (idx, &fx) in fv.iter().enumerate() {
        let mut s = y;
        for (k, inc) in increments.iter().enumerate() {
            s += inc[idx / m.pow((n - k - 1) as u32)];
        }
        residual = residual.max((fx - s).abs());
    }
    let max_slice_rho = increments
        .iter()
        .flat_map(|inc| inc.chunks(m).map(|slice| spec.rho(slice).value().abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max);
    Ok(SuperhedgeCert { y, increments, residual, max_slice_rho })
}

fn transport_check(mu: &Dist, cost: &[Vec<f64>]) -> Result<AlphaSpec> {
    let spec = AlphaSpec::Transport { mu: mu.clone(), cost: cost.to_vec() };
    spec.validate()?;
    Ok(spec)
}

/// `sup` over adapted controls `Y_k = Y_k(X_1..X_k)` of `E[f(Y) − Σ c(X_i, Y_i)]`
/// for `X` i.i.d. `μ`.
///
/// The backward pass runs over post-decision states `(y_1, …, y_k)` and stores
/// a feedback policy; the value is then the exact forward expectation of that
/// policy over all paths of `X`.
pub fn control_value_transport(f: &RealFieldN, mu: &Dist, cost: &[Vec<f64>]) -> Result<ExtReal> {
    transport_check(mu, cost)?;
    let (n, m) = (f.n(), f.m());
    if mu.len() != m {
        return input("μ and the field live on different spaces");
    }
    dense_size(m, n)?;
    // w[k]: post-decision value on E^k; policy[k][state * m + x] = y
    let mut w: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    let mut policy: Vec<Vec<usize>> = vec![Vec::new(); n];
    w[n] = dense_of(f)?;
    for k in (0..n).rev() {
        let states = m.pow(k as u32);
        let mut wk = vec![0.0; states];
        let mut pk = vec![0; states * m];
        for s in 0..states {
            let cont = &w[k + 1][s * m..(s + 1) * m];
            let mut acc = 0.0;
            for x in 0..m {
                let (mut by, mut bv) = (0, f64::NEG_INFINITY);
                for (y, &cv) in cont.iter().enumerate() {
                    let v = ext_sub(cv, cost[x][y]);
                    if v > bv {
                        by = y;
                        bv = v;
                    }
                }
                pk[s * m + x] = by;
                acc = ext_add(acc, weight_mul(mu.get(x), bv));
            }
            wk[s] = acc;
        }
        w[k] = wk;
        policy[k] = pk;
    }
    // forward evaluation of the feedback policy
    let fv = &w[n];
    let paths = m.pow(n as u32);
    let mut value = 0.0;
    for code in 0..paths {
        let xs = crate::space::decode(code, m, n);
        let prob: f64 = xs.iter().map(|&x| mu.get(x)).product();
        if prob == 0.0 {
            continue;
        }
        let mut state = 0usize;
        let mut running = 0.0;
        for (k, &x) in xs.iter().enumerate() {
            let y = policy[k][state * m + x];
            running = ext_sub(running, cost[x][y]);
            state = state * m + y;
        }
        value = ext_add(value, weight_mul(prob, ext_add(running, fv[state])));
    }
    Ok(ExtReal::new(value))
}

/// Exhaustive search over all adapted controls for two stages.
///
/// Feasible only for tiny instances (`m^m · m^{m²}` policies).
pub fn control_value_bruteforce_n2(f: &RealFieldN, mu: &Dist, cost: &[Vec<f64>]) -> Result<ExtReal> {
    transport_check(mu, cost)?;
    let m = f.m();
    if f.n() != 2 || m > 3 {
        return input("brute-force control search supports n = 2, m ≤ 3");
    }
    let fv = dense_of(f)?;
    let first_choices = m.pow(m as u32);
    let second_choices = m.pow((m * m) as u32);
    let mut best = f64::NEG_INFINITY;
    for a in 0..first_choices {
        let y1 = crate::space::decode(a, m, m);
        for b in 0..second_choices {
            let y2 = crate::space::decode(b, m, m * m);
            let mut v = 0.0;
            for x1 in 0..m {
                for x2 in 0..m {
                    let p = mu.get(x1) * mu.get(x2);
                    let (u1, u2) = (y1[x1], y2[x1 * m + x2]);
                    let pay = ext_sub(ext_sub(fv[u1 * m + u2], cost[x1][u1]), cost[x2][u2]);
                    v = ext_add(v, weight_mul(p, pay));
                }
            }
            best = best.max(v);
        }
    }
    Ok(ExtReal::new(best))
}

/// `sup_{π ∈ Π(μ)} (F(π(E × ·)) − ∫ c dπ)` on a two-point space.
///
/// For a fixed second marginal the coupling cost is linear on a segment, so
/// it is minimized at an endpoint; the outer search is one-dimensional.
pub fn coupling_target_two_point(big_f: &dyn Fn(&[f64]) -> f64, mu: &Dist, cost: &[Vec<f64>]) -> Result<f64> {
    if mu.len() != 2 {
        return input("coupling form is implemented for two-point spaces");
    }
    let (m0, m1) = (mu.get(0), mu.get(1));
    let plan_cost = |t: f64, a: f64| {
        let pi = [[a, m0 - a], [t - a, m1 - t + a]];
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let p = pi[i][j].max(0.0);
                s = ext_add(s, weight_mul(if p > 1e-15 { p } else { 0.0 }, cost[i][j]));
            }
        }
        s
    };
    let objective = |t: f64| {
        let lo = 0f64.max(t - m1);
        let hi = m0.min(t);
        let inner = plan_cost(t, lo).min(plan_cost(t, hi));
        ext_sub(big_f(&[t, 1.0 - t]), inner)
    };
    let grid = 2000;
    let (mut bt, mut bv) = (0.0, f64::NEG_INFINITY);
    for i in 0..=grid {
        let t = i as f64 / grid as f64;
        let v = objective(t);
        if v > bv {
            bt = t;
            bv = v;
        }
    }
    let h = 1.0 / grid as f64;
    let (_, v) = golden_max(objective, (bt - h).max(0.0), (bt + h).min(1.0), 1e-14);
    Ok(bv.max(v))
}

/// Long-run average of the transport control problem: `v_n` along the
/// schedule, the target `sup_ν (F(ν) − α(ν))`, and (on two-point spaces) the
/// same target computed over couplings.
pub fn transport_longrun(
    big_f: &(dyn Fn(&[f64]) -> f64 + Sync),
    mu: &Dist,
    cost: &[Vec<f64>],
    schedule: &[usize],
) -> Result<SanovRun> {
    let spec = transport_check(mu, cost)?;
    let mut run = sanov_limit(big_f, &spec, schedule)?;
    if mu.len() == 2 {
        // one-dimensional dual target for a sharper comparison
        let obj = |t: f64| {
            let nu = Dist::new(vec![t, 1.0 - t]).expect("two-point law");
            ext_sub(big_f(nu.weights()), transport_alpha(&nu, mu, cost).value())
        };
        let (mut bt, mut bv) = (0.0, f64::NEG_INFINITY);
        for i in 0..=2000 {
            let t = i as f64 / 2000.0;
            let v = obj(t);
            if v > bv {
                bt = t;
                bv = v;
            }
        }
        let (t, v) = golden_max(obj, (bt - 5e-4).max(0.0), (bt + 5e-4).min(1.0), 1e-14);
        if v.max(bv) > run.target {
            run.target = v.max(bv);
            run.target_argmax = if v >= bv { vec![t, 1.0 - t] } else { vec![bt, 1.0 - bt] };
        }
        run.gaps = run.values.iter().map(|x| (x - run.target).abs()).collect();
        run.coupling_target = Some(coupling_target_two_point(big_f, mu, cost)?);
    }
    Ok(run)
}
