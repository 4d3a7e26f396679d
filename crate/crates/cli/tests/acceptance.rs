//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use sanov_dual::alpha::{alpha_n, lp_entropy, relative_entropy, transport_alpha};
use sanov_dual::dp::{brute_force_check, control_value_transport, rho_n_dense, sanov_limit, sanov_value, superhedge};
use sanov_dual::{AlphaSpec, Dist, LossFn, ProductDist, RealFieldN};

type Check = (bool, String);

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_dist(r: &mut ChaCha8Rng, m: usize) -> Dist {
    let e: Vec<f64> = (0..m).map(|_| -(1.0 - r.random::<f64>()).ln()).collect();
    Dist::from_unnormalized(e).unwrap()
}

fn interior_dist(r: &mut ChaCha8Rng, m: usize) -> Dist {
    let d = random_dist(r, m);
    Dist::from_unnormalized(d.weights().iter().map(|w| w + 0.05).collect()).unwrap()
}

fn random_f(r: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| 2.0 * r.random::<f64>() - 1.0).collect()
}

fn random_cost(r: &mut ChaCha8Rng, m: usize) -> Vec<Vec<f64>> {
    (0..m).map(|i| (0..m).map(|j| if i == j { 0.0 } else { 0.2 + 1.5 * r.random::<f64>() }).collect()).collect()
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}

fn ln_choose(n: usize, k: usize) -> f64 {
    let ln_fact = |x: usize| (1..=x).map(|i| (i as f64).ln()).sum::<f64>();
    ln_fact(n) - ln_fact(k) - ln_fact(n - k)
}

fn c1_duality() -> Check {
    let mut r = rng(101);
    let mut worst_exp: f64 = 0.0;
    let mut worst_lp: f64 = 0.0;
    for _ in 0..100 {
        let m = 2 + r.random_range(0..4usize);
        let mu = random_dist(&mut r, m);
        let f: Vec<f64> = random_f(&mut r, m).iter().map(|x| 3.0 * x).collect();
        let spec = AlphaSpec::Shortfall { mu: mu.clone(), loss: LossFn::Exp };
        let lse = log_sum_exp(&f.iter().zip(mu.weights()).map(|(x, w)| x + w.ln()).collect::<Vec<_>>());
        worst_exp = worst_exp.max((spec.rho(&f).value() - lse).abs());

        let nu = random_dist(&mut r, m);
        let mu = interior_dist(&mut r, m);
        for q in [1.5, 2.0, 3.0] {
            let s = AlphaSpec::Shortfall { mu: mu.clone(), loss: LossFn::PowerPlus { q } }.alpha(&nu).value();
            worst_lp = worst_lp.max((s - lp_entropy(&nu, &mu, q / (q - 1.0)).value()).abs());
        }
    }
    (worst_exp <= 1e-9 && worst_lp <= 1e-6, format!("exp err {worst_exp:.2e} (tol 1e-9), Lp err {worst_lp:.2e} (tol 1e-6)"))
}

fn six_specs(r: &mut ChaCha8Rng, m: usize) -> Vec<AlphaSpec> {
    let mu = interior_dist(r, m);
    vec![
        AlphaSpec::RelativeEntropy { mu: mu.clone() },
        AlphaSpec::LpEntropy { mu: mu.clone(), p: 2.0 },
        AlphaSpec::Shortfall { mu: mu.clone(), loss: LossFn::PowerPlus { q: 3.0 } },
        AlphaSpec::Robust { set: vec![interior_dist(r, m), interior_dist(r, m)] },
        AlphaSpec::SetIndicator { set: vec![interior_dist(r, m), interior_dist(r, m)] },
        AlphaSpec::Transport { mu, cost: random_cost(r, m) },
    ]
}

fn c2_brute_force() -> Check {
    let mut r = rng(102);
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for spec in six_specs(&mut r, 2) {
        for n in [2usize, 3] {
            let f = RealFieldN::dense(n, 2, random_f(&mut r, 1 << n)).unwrap();
            let rep = brute_force_check(&f, &spec, 10_000, 7).unwrap();
            ok &= rep.agrees(1e-6);
            worst = worst.max((rep.achieved - rep.dp_value).abs()).max(rep.max_sampled - rep.dp_value);
        }
    }
    (ok, format!("12 cases, worst excess {worst:.2e} (tol 1e-6)"))
}

fn c3_chain_rule() -> Check {
    let mut r = rng(103);
    let mu = interior_dist(&mut r, 3);
    let spec = AlphaSpec::RelativeEntropy { mu: mu.clone() };
    let mu2: Vec<f64> = (0..9).map(|i| mu.get(i / 3) * mu.get(i % 3)).collect();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let w = random_dist(&mut r, 9);
        let h: f64 = w.weights().iter().zip(&mu2).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum();
        let nu = ProductDist::new(2, 3, w.weights().to_vec()).unwrap();
        worst = worst.max((alpha_n(&nu, &spec).value() - h).abs());
    }
    (worst <= 1e-10, format!("max err {worst:.2e} (tol 1e-10)"))
}

fn c4_sanov() -> Check {
    let spec = AlphaSpec::RelativeEntropy { mu: Dist::uniform(2) };
    let big_f = |nu: &[f64]| -(nu[0] - 0.7).powi(2);
    let schedule = [25usize, 50, 100, 200];
    let run = sanov_limit(&big_f, &spec, &schedule).unwrap();
    let mut worst: f64 = 0.0;
    for (&n, &v) in schedule.iter().zip(&run.values) {
        let terms: Vec<f64> = (0..=n)
            .map(|j| {
                let t = j as f64 / n as f64;
                ln_choose(n, j) - n as f64 * 2f64.ln() + n as f64 * big_f(&[t, 1.0 - t])
            })
            .collect();
        worst = worst.max((v - log_sum_exp(&terms) / n as f64).abs());
    }
    // sup_t −(t − 0.7)² − H((t, 1 − t) | uniform) on a fine grid
    let target = (0..=200_000)
        .map(|i| {
            let t = i as f64 / 200_000.0;
            let nu = Dist::new(vec![t, 1.0 - t]).unwrap();
            big_f(&[t, 1.0 - t]) - relative_entropy(&nu, &Dist::uniform(2)).value()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let gaps: Vec<f64> = run.values.iter().map(|v| (v - target).abs()).collect();
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    (
        worst <= 1e-9 && gaps[3] <= 0.05 && decreasing,
        format!("oracle err {worst:.2e} (tol 1e-9), gap at 200 {:.4} (tol 0.05), decreasing {decreasing}", gaps[3]),
    )
}

fn c5_finite_shadow() -> Check {
    let mu = Dist::uniform(2);
    let inf_alpha = lp_entropy(&Dist::new(vec![0.8, 0.2]).unwrap(), &mu, 2.0).value();
    let rhs = 1.1 / inf_alpha;
    let mut ok = (inf_alpha - (1.36f64.sqrt() - 1.0)).abs() < 1e-12;
    let mut lhs_max: f64 = 0.0;
    for n in [50usize, 100, 200] {
        let k = (4 * n).div_ceil(5);
        let terms: Vec<f64> = (k..=n).map(|j| ln_choose(n, j) - n as f64 * 2f64.ln()).collect();
        let p = log_sum_exp(&terms).exp();
        let lhs = (n as f64).sqrt() * p.sqrt();
        lhs_max = lhs_max.max(lhs);
        ok &= lhs <= rhs;
    }
    (ok, format!("max n^(1/2) P^(1/2) = {lhs_max:.3e} <= {rhs:.4}"))
}

fn c6_lp_estimate() -> Check {
    let mut r = rng(106);
    let mu = interior_dist(&mut r, 2);
    let spec = AlphaSpec::LpEntropy { mu: mu.clone(), p: 2.0 };
    let mu2: Vec<f64> = (0..4).map(|i| mu.get(i / 2) * mu.get(i % 2)).collect();
    let mut violations = 0;
    for _ in 0..1000 {
        let w = random_dist(&mut r, 4);
        let norm: f64 = w.weights().iter().zip(&mu2).map(|(a, b)| (a / b).powi(2) * b).sum::<f64>().sqrt();
        let nu = ProductDist::new(2, 2, w.weights().to_vec()).unwrap();
        if alpha_n(&nu, &spec).value() > 2f64.sqrt() * norm + 1e-9 {
            violations += 1;
        }
    }
    (violations == 0, format!("{violations} violations in 1000"))
}

fn c7_superhedge() -> Check {
    let mut r = rng(107);
    let (mut res, mut slice): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let mu = interior_dist(&mut r, 2);
        for spec in [
            AlphaSpec::RelativeEntropy { mu: mu.clone() },
            AlphaSpec::Shortfall { mu: mu.clone(), loss: LossFn::PowerPlus { q: 2.0 } },
        ] {
            let f = RealFieldN::dense(3, 2, random_f(&mut r, 8)).unwrap();
            let cert = superhedge(&f, &spec).unwrap();
            res = res.max(cert.residual);
            slice = slice.max(cert.max_slice_rho);
        }
    }
    (res <= 1e-8 && slice <= 1e-7, format!("max residual {res:.2e} (tol 1e-8), max slice rho {slice:.2e} (tol 1e-7)"))
}

fn transport_grid_oracle(f: &[f64], mu: &Dist, cost: &[Vec<f64>]) -> f64 {
    let obj = |w: &[f64]| {
        let nu = Dist::from_unnormalized(w.to_vec()).unwrap();
        nu.integrate(f) - transport_alpha(&nu, mu, cost).value()
    };
    let k = 100;
    let (mut best, mut bv) = ([0.0; 3], f64::NEG_INFINITY);
    for i in 0..=k {
        for j in 0..=k - i {
            let w = [i as f64 / k as f64, j as f64 / k as f64, (k - i - j) as f64 / k as f64];
            let v = obj(&w);
            if v > bv {
                bv = v;
                best = w;
            }
        }
    }
    for i in -10i32..=10 {
        for j in -10i32..=10 {
            let (a, b) = (best[0] + i as f64 * 1e-3, best[1] + j as f64 * 1e-3);
            if a >= 0.0 && b >= 0.0 && a + b <= 1.0 {
                bv = bv.max(obj(&[a, b, (1.0 - a - b).max(0.0)]));
            }
        }
    }
    bv
}

fn c8_transport() -> Check {
    let mut r = rng(108);
    let (mut grid_err, mut ctrl_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let mu = interior_dist(&mut r, 3);
        let cost = random_cost(&mut r, 3);
        let f = random_f(&mut r, 3);
        let spec = AlphaSpec::Transport { mu: mu.clone(), cost: cost.clone() };
        grid_err = grid_err.max((spec.rho(&f).value() - transport_grid_oracle(&f, &mu, &cost)).abs());
        let field = RealFieldN::dense(2, 3, random_f(&mut r, 9)).unwrap();
        let cv = control_value_transport(&field, &mu, &cost).unwrap().value();
        ctrl_err = ctrl_err.max((cv - rho_n_dense(&field, &spec).unwrap().0.value()).abs());
    }
    (
        grid_err <= 2e-3 && ctrl_err <= 1e-10,
        format!("grid oracle err {grid_err:.2e} (tol 2e-3), control err {ctrl_err:.2e} (tol 1e-10)"),
    )
}

fn c9_robust() -> Check {
    let mut r = rng(109);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let set = [interior_dist(&mut r, 2), interior_dist(&mut r, 2)];
        let f = random_f(&mut r, 4);
        // sup over a first marginal in M and one kernel row in M per x_1
        let mut best = f64::NEG_INFINITY;
        for p in &set {
            for k0 in &set {
                for k1 in &set {
                    let inner = |k: &Dist, x1: usize| (0..2).map(|x2| k.get(x2) * f[2 * x1 + x2].exp()).sum::<f64>();
                    best = best.max((p.get(0) * inner(k0, 0) + p.get(1) * inner(k1, 1)).ln());
                }
            }
        }
        let spec = AlphaSpec::Robust { set: set.to_vec() };
        let dp = rho_n_dense(&RealFieldN::dense(2, 2, f).unwrap(), &spec).unwrap().0.value();
        worst = worst.max((dp - best).abs());
    }
    (worst <= 1e-9, format!("max err {worst:.2e} (tol 1e-9)"))
}

struct CliRun {
    code: Option<i32>,
    stdout: Vec<u8>,
    files: BTreeMap<String, Vec<u8>>,
    elapsed: Duration,
    _dir: tempfile::TempDir,
}

impl CliRun {
    fn report(&self) -> Value {
        serde_json::from_slice(&self.files["report.json"]).unwrap()
    }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn subcommand_for(file: &str) -> &'static str {
    for (prefix, sub) in [
        ("rho_", "rho"),
        ("sanov_", "sanov"),
        ("cramer_", "cramer"),
        ("tailbound_", "tailbound"),
        ("azuma_", "tailbound"),
        ("saa_", "saa"),
        ("superhedge", "superhedge"),
        ("transport", "transport"),
    ] {
        if file.starts_with(prefix) {
            return sub;
        }
    }
    panic!("no subcommand for config {file}")
}

fn run_cli(args: &[&str], threads: &str) -> CliRun {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let o = Command::new(env!("CARGO_BIN_EXE_sanov-dual"))
        .args(args)
        .args(["--seed", "0", "--threads", threads, "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    let elapsed = start.elapsed();
    let mut files = BTreeMap::new();
    for e in std::fs::read_dir(dir.path()).unwrap() {
        let e = e.unwrap();
        files.insert(e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap());
    }
    CliRun { code: o.status.code(), stdout: o.stdout, files, elapsed, _dir: dir }
}

/// Every bundled config, run twice with different thread counts.
fn all_runs() -> BTreeMap<String, (CliRun, CliRun)> {
    let mut names: Vec<String> = std::fs::read_dir(configs_dir())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".json"))
        .collect();
    names.sort();
    let mut runs = BTreeMap::new();
    for name in names {
        let path = configs_dir().join(&name);
        let args = [subcommand_for(&name), "--config", path.to_str().unwrap()];
        runs.insert(name, (run_cli(&args, "1"), run_cli(&args, "2")));
    }
    let flags = ["cramer", "--Mq", "1", "--r", "2", "--q", "2", "--n", "100"];
    runs.insert("cramer flags".into(), (run_cli(&flags, "1"), run_cli(&flags, "2")));
    runs
}

fn c10_tailbound(run: &CliRun) -> Check {
    if run.code != Some(0) {
        return (false, format!("exit {:?}", run.code));
    }
    let rep = run.report();
    let (mq, r, q) = (rep["mq"].as_f64().unwrap(), rep["r"].as_f64().unwrap(), rep["q"].as_f64().unwrap());
    let mut ok = q == 2.0 && (r - mq - 1.0).abs() < 1e-12;
    let limit = 1.2 * (mq / (r - mq)).powf(q);
    let (mut worst, mut worst_hi): (f64, f64) = (0.0, 0.0);
    for cell in rep["cells"].as_array().unwrap() {
        let n = cell["n"].as_u64().unwrap();
        if n == 1000 || n == 10_000 {
            ok &= cell["reps"].as_u64() == Some(100_000);
            let scaled = cell["p_hat"].as_f64().unwrap() * (n as f64).powf(q - 1.0);
            worst = worst.max(scaled / limit);
            worst_hi = worst_hi.max(cell["hi"].as_f64().unwrap() * (n as f64).powf(q - 1.0) / limit);
        }
    }
    ok &= worst <= 1.0;
    let upper = rep["slope_upper"].as_f64().unwrap_or(f64::INFINITY);
    ok &= upper <= -0.75;
    ok &= run.elapsed < Duration::from_secs(300);
    (
        ok,
        format!(
            "max p_hat n^(q-1) / limit {worst:.3} (<= 1; Wilson upper {worst_hi:.3}), slope upper {upper:.3} (<= -0.75), {:.1} s",
            run.elapsed.as_secs_f64()
        ),
    )
}

fn c11_saa(run: &CliRun) -> Check {
    if run.code != Some(0) {
        return (false, format!("exit {:?}", run.code));
    }
    let rep = run.report();
    let p_trend = rep["saa"]["trend"]["p_value"].as_f64().unwrap_or(0.0);
    let cc = &rep["cross_check"];
    // independent enumeration: |w − x| on {0, 1}, w ∈ {0, 1, 2} w.p. (0.3, 0.5, 0.2), n = 3
    let (pts, probs) = ([0.0, 1.0, 2.0], [0.3, 0.5, 0.2]);
    let v = |ws: &[f64]| {
        [0.0, 1.0]
            .iter()
            .map(|x| ws.iter().map(|w| (w - x).abs()).sum::<f64>() / ws.len() as f64)
            .fold(f64::INFINITY, f64::min)
    };
    let v_mu = [0.0f64, 1.0]
        .iter()
        .map(|x| pts.iter().zip(&probs).map(|(w, p)| p * (w - x).abs()).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let mut exact = 0.0;
    for i in 0..27 {
        let idx = [i / 9, (i / 3) % 3, i % 3];
        let ws: Vec<f64> = idx.iter().map(|&k| pts[k]).collect();
        if (v(&ws) - v_mu).abs() >= 0.25 {
            exact += idx.iter().map(|&k| probs[k]).product::<f64>();
        }
    }
    let p_hat = cc["estimate"]["p_hat"].as_f64().unwrap();
    let reps = cc["estimate"]["reps"].as_f64().unwrap();
    let sd = (exact * (1.0 - exact) / reps).sqrt();
    let cross = cc["n"].as_u64() == Some(3)
        && (cc["exact"].as_f64().unwrap() - exact).abs() < 1e-12
        && (p_hat - exact).abs() <= 4.0 * sd;
    (
        p_trend > 0.05 && cross,
        format!("Mann-Kendall p {p_trend:.3} (> 0.05), n=3 exact {exact:.4} vs p_hat {p_hat:.4} (4 sd = {:.4})", 4.0 * sd),
    )
}

fn c12_azuma(runs: &[&CliRun]) -> Check {
    let x: f64 = 0.5;
    let phi_star = 0.5 * ((1.0 + x) * (1.0 + x).ln() + (1.0 - x) * (1.0 - x).ln());
    let mut ok = true;
    let mut parts = Vec::new();
    for run in runs {
        if run.code != Some(0) {
            return (false, format!("exit {:?}", run.code));
        }
        let rep = run.report();
        let row = &rep["rows"][0];
        let rate = row["rate"].as_f64().unwrap_or(f64::INFINITY);
        ok &= row["n"].as_u64() == Some(400) && rep["r"].as_f64() == Some(0.5) && rate <= -phi_star + 0.1;
        parts.push(format!("{} {rate:.4}", rep["family"].as_str().unwrap_or("?")));
    }
    (ok, format!("rates {} (<= {:.4})", parts.join(", "), -phi_star + 0.1))
}

fn c13_determinism(runs: &BTreeMap<String, (CliRun, CliRun)>) -> Check {
    let mut differing = Vec::new();
    let mut files = 0;
    for (name, (a, b)) in runs {
        files += a.files.len();
        if a.code != b.code || a.stdout != b.stdout || a.files != b.files {
            differing.push(name.clone());
        }
    }
    let manifests = runs.values().filter(|(a, _)| a.files.contains_key("manifest.json")).count();
    (
        differing.is_empty() && manifests + 1 >= runs.len(),
        format!("{} runs, {files} files, {manifests} manifests, differing: {differing:?}", runs.len()),
    )
}

fn main() {
    let mut failed = 0;
    let mut emit = |id: u32, name: &str, limit: Option<Duration>, f: &dyn Fn() -> Check| {
        let start = Instant::now();
        let (mut ok, detail) = f();
        let el = start.elapsed();
        if let Some(l) = limit {
            ok &= el < l;
        }
        if !ok {
            failed += 1;
        }
        println!("{} {id:>2} {name}: {detail} [{:.2} s]", if ok { "PASS" } else { "FAIL" }, el.as_secs_f64());
    };
    emit(1, "closed-form duality", Some(Duration::from_secs(1)), &c1_duality);
    emit(2, "recursion vs brute force", Some(Duration::from_secs(30)), &c2_brute_force);
    emit(3, "chain rule", None, &c3_chain_rule);
    emit(4, "Sanov limit", Some(Duration::from_secs(10)), &c4_sanov);
    emit(5, "finite-n tail shadow", Some(Duration::from_secs(1)), &c5_finite_shadow);
    emit(6, "L^p estimate for alpha_2", None, &c6_lp_estimate);
    emit(7, "superhedging certificate", None, &c7_superhedge);
    emit(8, "transport duality", None, &c8_transport);
    emit(9, "robust formula", None, &c9_robust);

    let runs = all_runs();
    let get = |k: &str| &runs[k].0;
    emit(10, "heavy-tail deviation bound", None, &|| c10_tailbound(get("tailbound_pareto.json")));
    emit(11, "SAA rates", None, &|| c11_saa(get("saa_pareto.json")));
    emit(12, "Azuma experiment", None, &|| c12_azuma(&[get("azuma_rademacher.json"), get("azuma_scripted.json")]));
    emit(13, "CLI determinism", None, &|| c13_determinism(&runs));

    // sanity: the bundled classical config reaches the same v_200
    let v200 = sanov_value(&|nu: &[f64]| -(nu[0] - 0.7).powi(2), &AlphaSpec::RelativeEntropy { mu: Dist::uniform(2) }, 200)
        .unwrap();
    let cli_v200 = get("sanov_classical.json").report()["values"][3].as_f64().unwrap();
    if (v200 - cli_v200).abs() > 1e-12 {
        println!("FAIL bundled sanov config disagrees with the library: {cli_v200} vs {v200}");
        failed += 1;
    }

    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
