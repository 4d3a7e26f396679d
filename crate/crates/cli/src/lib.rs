//! Subcommand drivers for the `sanov-dual` binary. Each driver turns config
//! bytes into named output files; [`write_outputs`] adds the manifest.

pub mod config;
pub mod error;

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use sanov_dual::alpha::transport_alpha;
use sanov_dual::cramer::{deviation_bound, lambda_star_constrained, moment_mq, ConjugatePair, SampleLaw};
use sanov_dual::dp::{control_value_transport, rho_n_dense, sanov_limit, superhedge, transport_longrun, SanovRun};
use sanov_dual::mc::azuma::azuma_experiment;
use sanov_dual::mc::saa::{argmin_tracking, saa_run};
use sanov_dual::mc::{estimate_tail, rate_fit, RateFit, TailEstimate};
use sanov_dual::rho::{rho_generic, rho_oce, rho_transport, GenericOptions, OceFn};
use sanov_dual::{AlphaSpec, ExtReal};

use config::{at, parse};
pub use error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subcommand {
    Rho,
    Sanov,
    Cramer,
    Tailbound,
    Saa,
    Superhedge,
    Transport,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Rho => "rho",
            Subcommand::Sanov => "sanov",
            Subcommand::Cramer => "cramer",
            Subcommand::Tailbound => "tailbound",
            Subcommand::Saa => "saa",
            Subcommand::Superhedge => "superhedge",
            Subcommand::Transport => "transport",
        }
    }
}

/// Files produced by a run, a human summary, and an error to report after
/// the files are written (inconclusive statistics).
#[derive(Debug, Default)]
pub struct Outputs {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: String,
    pub deferred: Option<CliError>,
}

impl Outputs {
    fn json(&mut self, name: &str, v: &impl Serialize) -> CliResult<()> {
        self.files.push((name.to_string(), to_json(v)?));
        Ok(())
    }

    fn csv<R: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = R>) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| CliError::Output(e.into()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Output(e.into_error()))?;
        self.files.push((name.to_string(), bytes));
        Ok(())
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json(v: &impl Serialize) -> CliResult<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(v).map_err(|e| CliError::Output(e.into()))?;
    s.push(b'\n');
    Ok(s)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn run(cmd: Subcommand, config: &[u8], seed: u64) -> CliResult<Outputs> {
    match cmd {
        Subcommand::Rho => cmd_rho(parse(config)?, seed),
        Subcommand::Sanov => cmd_sanov(parse(config)?),
        Subcommand::Cramer => cmd_cramer(parse(config)?),
        Subcommand::Tailbound => cmd_tailbound(parse(config)?, seed),
        Subcommand::Saa => cmd_saa(parse(config)?, seed),
        Subcommand::Superhedge => cmd_superhedge(parse(config)?),
        Subcommand::Transport => cmd_transport(parse(config)?),
    }
}

#[derive(Serialize)]
struct OutputEntry<'a> {
    file: &'a str,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    cli_version: &'static str,
    engine_version: &'static str,
    subcommand: &'a str,
    config_sha256: String,
    seed: u64,
    outputs: Vec<OutputEntry<'a>>,
}

/// Writes every output file and `manifest.json` into `dir`.
pub fn write_outputs(dir: &Path, cmd: &str, config: &[u8], seed: u64, out: &Outputs) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in &out.files {
        std::fs::write(dir.join(name), bytes)?;
    }
    let manifest = Manifest {
        tool: "sanov-dual",
        cli_version: env!("CARGO_PKG_VERSION"),
        engine_version: sanov_dual::VERSION,
        subcommand: cmd,
        config_sha256: sha256_hex(config),
        seed,
        outputs: out.files.iter().map(|(n, b)| OutputEntry { file: n, sha256: sha256_hex(b) }).collect(),
    };
    std::fs::write(dir.join("manifest.json"), to_json(&manifest)?)?;
    Ok(())
}

fn numeric(msg: impl Into<String>) -> CliError {
    CliError::Engine(sanov_dual::Error::Numeric(msg.into()))
}

fn check_len(path: &str, len: usize, m: usize) -> CliResult<()> {
    if len != m {
        return Err(CliError::ConfigAt { path: path.into(), msg: format!("expected {m} values, got {len}") });
    }
    Ok(())
}

#[derive(Serialize)]
struct OceReport {
    value: ExtReal,
    phi: OceFn,
}

fn cmd_rho(cfg: config::RhoConfig, seed: u64) -> CliResult<Outputs> {
    let mut out = Outputs::default();
    match (&cfg.spec, &cfg.oce) {
        (Some(spec), None) => {
            at("spec", spec.validate())?;
            check_len("f", cfg.f.len(), spec.m())?;
            let res = if cfg.generic {
                rho_generic(&cfg.f, spec, GenericOptions { seed, ..GenericOptions::default() })
            } else {
                spec.evaluate(&cfg.f)
            };
            writeln!(out.summary, "value {}", res.value).ok();
            writeln!(out.summary, "method {:?}", res.method).ok();
            if let Some(nu) = &res.maximizer {
                writeln!(out.summary, "maximizer {:?}", nu.weights()).ok();
            }
            out.json("report.json", &res)?;
        }
        (None, Some(oce)) => {
            check_len("f", cfg.f.len(), oce.mu.len())?;
            let value = rho_oce(&cfg.f, &oce.mu, &oce.phi);
            writeln!(out.summary, "value {value}").ok();
            out.json("report.json", &OceReport { value, phi: oce.phi.clone() })?;
        }
        _ => return Err(CliError::Config("exactly one of `spec` and `oce` must be given".into())),
    }
    Ok(out)
}

#[derive(Serialize)]
struct SanovCsvRow {
    n: usize,
    v_n: f64,
    target: f64,
    gap: f64,
}

fn sanov_rows(run: &SanovRun) -> Vec<SanovCsvRow> {
    run.rows().into_iter().map(|(n, v_n, target, gap)| SanovCsvRow { n, v_n, target, gap }).collect()
}

fn cmd_sanov(cfg: config::SanovConfig) -> CliResult<Outputs> {
    at("spec", cfg.spec.validate())?;
    cfg.functional.check(cfg.spec.m(), "functional")?;
    if cfg.schedule.is_empty() || cfg.schedule.contains(&0) {
        return Err(CliError::ConfigAt { path: "schedule".into(), msg: "need a nonempty list of positive n".into() });
    }
    let f = |nu: &[f64]| cfg.functional.eval(nu);
    let run = match &cfg.spec {
        AlphaSpec::Transport { mu, cost } => transport_longrun(&f, mu, cost, &cfg.schedule)?,
        spec => sanov_limit(&f, spec, &cfg.schedule)?,
    };
    let mut out = Outputs::default();
    writeln!(out.summary, "target {}", run.target).ok();
    for (n, v, _, g) in run.rows() {
        writeln!(out.summary, "n {n} v_n {v} gap {g}").ok();
    }
    out.json("report.json", &run)?;
    out.csv("sanov.csv", sanov_rows(&run))?;
    Ok(out)
}

#[derive(Serialize)]
struct DeviationReport {
    r: f64,
    mq: f64,
    q: f64,
    n: f64,
    bound: f64,
}

#[derive(Serialize)]
struct CramerReport {
    pair: ConjugatePair,
    lambda_convex: bool,
    lambda_star_convex: bool,
    minorant_holds: bool,
    /// `Λ*` on the primal grid from the constrained entropy form (finite support only).
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_vec")]
    lambda_star_constrained: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    deviation: Option<DeviationReport>,
}

mod opt_vec {
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &Option<Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => sanov_dual::ext::vec_f64::serialize(v, s),
            None => s.serialize_none(),
        }
    }
}

#[derive(Serialize)]
struct GridRow {
    grid_point: f64,
    value: f64,
}

/// `(M_q/(r − M_q))^q n^{1−q}` from explicit inputs.
pub fn cramer_flags(mq: f64, r: f64, q: f64, n: f64) -> CliResult<Outputs> {
    let bound = at("flags", deviation_bound(r, mq, q, n))?;
    let mut out = Outputs::default();
    writeln!(out.summary, "{bound}").ok();
    out.json("report.json", &DeviationReport { r, mq, q, n, bound })?;
    Ok(out)
}

fn cmd_cramer(cfg: config::CramerConfig) -> CliResult<Outputs> {
    at("law", cfg.law.validate(cfg.q))?;
    let pair = at("law", ConjugatePair::compute(&cfg.law, cfg.q, &cfg.dual_grid, &cfg.primal_grid))?;
    let lambda_star_constrained = match &cfg.law {
        SampleLaw::FiniteSupport { points, probs } if points.len() <= 4 => Some(
            cfg.primal_grid
                .iter()
                .map(|&x| lambda_star_constrained(x, points, probs, cfg.q))
                .collect::<sanov_dual::Result<Vec<f64>>>()?,
        ),
        _ => None,
    };
    let deviation = match &cfg.bound {
        Some(b) => Some(DeviationReport {
            r: b.r,
            mq: pair.mq,
            q: cfg.q,
            n: b.n,
            bound: at("bound", deviation_bound(b.r, pair.mq, cfg.q, b.n))?,
        }),
        None => None,
    };
    let mut out = Outputs::default();
    writeln!(out.summary, "M_q {}", pair.mq).ok();
    if let Some(d) = &deviation {
        writeln!(out.summary, "bound {}", d.bound).ok();
    }
    out.csv(
        "lambda.csv",
        pair.dual_grid.iter().zip(&pair.lambda).map(|(&grid_point, &value)| GridRow { grid_point, value }),
    )?;
    out.csv(
        "lambda_star.csv",
        pair.primal_grid.iter().zip(&pair.lambda_star).map(|(&grid_point, &value)| GridRow { grid_point, value }),
    )?;
    let report = CramerReport {
        lambda_convex: pair.lambda_is_convex(),
        lambda_star_convex: pair.lambda_star_is_convex(),
        minorant_holds: pair.minorant_holds(),
        lambda_star_constrained,
        deviation,
        pair,
    };
    out.json("report.json", &report)?;
    Ok(out)
}

/// Row of the tail CSV tables.
#[derive(Serialize)]
struct TailRow {
    n: usize,
    r: f64,
    p_hat: f64,
    lo: f64,
    hi: f64,
    bound: Option<f64>,
}

impl From<&TailEstimate> for TailRow {
    fn from(e: &TailEstimate) -> Self {
        TailRow { n: e.n, r: e.r, p_hat: e.p_hat, lo: e.lo, hi: e.hi, bound: e.bound }
    }
}

#[derive(Serialize)]
struct IidCell {
    #[serde(flatten)]
    estimate: TailEstimate,
    /// `p̂ / bound`.
    bound_ratio: Option<f64>,
}

#[derive(Serialize)]
struct IidReport {
    mq: Option<f64>,
    r: f64,
    q: f64,
    cells: Vec<IidCell>,
    fit: Option<RateFit>,
    slope_upper: Option<f64>,
    slope_ok: Option<bool>,
    bound_ok: Option<bool>,
}

/// Seed of the `k`-th schedule cell, so cells use disjoint streams.
pub fn cell_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_add((k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn cmd_tailbound(cfg: config::TailboundConfig, seed: u64) -> CliResult<Outputs> {
    let mut out = Outputs::default();
    match cfg {
        config::TailboundConfig::Iid { sampler, q, r, r_above_mq, schedule, reps, slope_max, bound_slack } => {
            at("sampler", sampler.validate())?;
            let law = sampler.law().ok();
            let mq = match &law {
                Some(l) => {
                    at("sampler", l.validate(q))?;
                    Some(at("sampler", moment_mq(l, q))?)
                }
                None => None,
            };
            let r = match (r, r_above_mq, mq) {
                (Some(r), None, _) => r,
                (None, Some(d), Some(mq)) => mq + d,
                (None, Some(_), None) => {
                    return Err(CliError::ConfigAt {
                        path: "r_above_mq".into(),
                        msg: "M_q is unavailable for this sampler; give `r`".into(),
                    })
                }
                _ => return Err(CliError::Config("exactly one of `r` and `r_above_mq` must be given".into())),
            };
            if schedule.is_empty() {
                return Err(CliError::ConfigAt { path: "schedule".into(), msg: "empty schedule".into() });
            }
            let mut cells = Vec::with_capacity(schedule.len());
            for (k, &n) in schedule.iter().enumerate() {
                let mut e = estimate_tail(&sampler, n, r, reps, cell_seed(seed, k))?;
                e.bound = match mq {
                    Some(mq) if r > mq => Some(deviation_bound(r, mq, q, n as f64)?),
                    _ => None,
                };
                log::info!("n {n}: {} hits of {reps}", e.hits);
                let bound_ratio = e.bound.map(|b| e.p_hat / b);
                cells.push(IidCell { estimate: e, bound_ratio });
            }
            let estimates: Vec<TailEstimate> = cells.iter().map(|c| c.estimate.clone()).collect();
            let fit = match rate_fit(&estimates) {
                Ok(f) => Some(f),
                Err(e @ sanov_dual::Error::Inconclusive(_)) => {
                    out.deferred = Some(CliError::Engine(e));
                    None
                }
                Err(e) => return Err(e.into()),
            };
            let slope_upper = fit.as_ref().map(RateFit::slope_upper);
            let slope_ok = slope_max.zip(slope_upper).map(|(max, up)| up <= max);
            let ratios: Option<Vec<f64>> = cells.iter().map(|c| c.bound_ratio).collect();
            let bound_ok = bound_slack.zip(ratios).map(|(s, rs)| rs.iter().all(|&x| x <= s));
            for c in &cells {
                let e = &c.estimate;
                writeln!(out.summary, "n {} p_hat {} [{}, {}] bound {:?}", e.n, e.p_hat, e.lo, e.hi, e.bound).ok();
            }
            if let Some(f) = &fit {
                writeln!(out.summary, "slope {} upper {}", f.slope, f.slope_upper()).ok();
            }
            out.csv("tail.csv", estimates.iter().map(TailRow::from))?;
            out.json("report.json", &IidReport { mq, r, q, cells, fit, slope_upper, slope_ok, bound_ok })?;
        }
        config::TailboundConfig::Azuma { family, r, schedule, reps, method } => {
            let rep = azuma_experiment(family, &schedule, r, reps, seed, method)?;
            let rows: Vec<TailRow> = rep
                .rows
                .iter()
                .map(|row| TailRow {
                    n: row.n,
                    r,
                    p_hat: row.p_hat,
                    lo: (row.p_hat - sanov_dual::mc::Z95 * row.se).max(0.0),
                    hi: row.p_hat + sanov_dual::mc::Z95 * row.se,
                    bound: Some((-(row.n as f64) * rep.phi_star).exp()),
                })
                .collect();
            for row in &rep.rows {
                writeln!(out.summary, "n {} rate {} bound {} holds {}", row.n, row.rate, row.bound, row.holds).ok();
            }
            out.csv("tail.csv", rows)?;
            out.json("report.json", &rep)?;
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct CrossCheckReport {
    n: usize,
    exact: f64,
    estimate: TailEstimate,
    /// `sqrt(p(1 − p)/R)` at the exact `p`.
    sd: f64,
    passes: bool,
}

#[derive(Serialize)]
struct SaaCliReport {
    saa: sanov_dual::mc::saa::SaaReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    argmin: Option<sanov_dual::mc::saa::ArgminReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cross_check: Option<CrossCheckReport>,
}

#[derive(Serialize)]
struct SaaCsvRow {
    n: usize,
    r: f64,
    p_hat: f64,
    lo: f64,
    hi: f64,
    bound: Option<f64>,
    scaled: f64,
}

fn saa_csv(rows: &[sanov_dual::mc::saa::SaaRow]) -> Vec<SaaCsvRow> {
    rows.iter()
        .map(|r| {
            let e = &r.estimate;
            SaaCsvRow { n: e.n, r: e.r, p_hat: e.p_hat, lo: e.lo, hi: e.hi, bound: e.bound, scaled: r.scaled }
        })
        .collect()
}

fn cmd_saa(cfg: config::SaaConfig, seed: u64) -> CliResult<Outputs> {
    at("instance", cfg.instance.validate())?;
    let saa = saa_run(&cfg.instance, &cfg.schedule, cfg.reps, seed)?;
    let argmin = match &cfg.argmin {
        Some(a) => {
            let mut inst = cfg.instance.clone();
            if let Some(eps) = a.eps {
                inst.eps = eps;
            }
            at("argmin.phi", inst.validate_growth(&a.phi))?;
            Some(argmin_tracking(&inst, &a.phi, &a.schedule, a.reps, seed)?)
        }
        None => None,
    };
    let cross_check = match &cfg.cross_check {
        Some(c) => {
            at("cross_check.instance", c.instance.validate())?;
            let exact = at("cross_check.instance", c.instance.exact_exceedance(c.n))?;
            let prob = saa_run(&c.instance, &[c.n], c.reps, seed)?;
            let estimate = prob.rows[0].estimate.clone();
            let sd = (exact * (1.0 - exact) / c.reps as f64).sqrt();
            let passes = (estimate.p_hat - exact).abs() <= 4.0 * sd;
            Some(CrossCheckReport { n: c.n, exact, estimate, sd, passes })
        }
        None => None,
    };
    let mut out = Outputs::default();
    writeln!(out.summary, "V(mu) {}", saa.v_mu).ok();
    for r in &saa.rows {
        writeln!(out.summary, "n {} p_hat {} scaled {}", r.estimate.n, r.estimate.p_hat, r.scaled).ok();
    }
    if let Some(t) = &saa.trend {
        writeln!(out.summary, "mann-kendall p {}", t.p_value).ok();
    }
    if let Some(c) = &cross_check {
        writeln!(out.summary, "cross-check n {} exact {} p_hat {} passes {}", c.n, c.exact, c.estimate.p_hat, c.passes)
            .ok();
    }
    out.csv("saa.csv", saa_csv(&saa.rows))?;
    if let Some(a) = &argmin {
        out.csv("argmin.csv", saa_csv(&a.rows))?;
    }
    out.json("report.json", &SaaCliReport { saa, argmin, cross_check })?;
    Ok(out)
}

fn cmd_superhedge(cfg: config::SuperhedgeConfig) -> CliResult<Outputs> {
    at("spec", cfg.spec.validate())?;
    let f = cfg.field.build(cfg.spec.m(), "field")?;
    let cert = superhedge(&f, &cfg.spec)?;
    if !cert.residual.is_finite() {
        return Err(numeric("superhedging residual is not finite"));
    }
    let mut out = Outputs::default();
    writeln!(out.summary, "y {}", cert.y).ok();
    writeln!(out.summary, "residual {}", cert.residual).ok();
    writeln!(out.summary, "max slice rho {}", cert.max_slice_rho).ok();
    out.json("report.json", &cert)?;
    Ok(out)
}

#[derive(Serialize)]
struct PlanReport {
    alpha: ExtReal,
    flow: Vec<Vec<f64>>,
    pivots: usize,
}

#[derive(Serialize)]
struct ControlReport {
    n: usize,
    control_value: ExtReal,
    rho_n: ExtReal,
}

#[derive(Serialize)]
struct TransportReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    plan: Option<PlanReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho: Option<ExtReal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    control: Option<ControlReport>,
}

fn cmd_transport(cfg: config::TransportConfig) -> CliResult<Outputs> {
    let spec = AlphaSpec::Transport { mu: cfg.mu.clone(), cost: cfg.cost.clone() };
    at("cost", spec.validate())?;
    let m = cfg.mu.len();
    let mut out = Outputs::default();
    let plan = match &cfg.nu {
        Some(nu) => {
            check_len("nu", nu.len(), m)?;
            let p = sanov_dual::transport::solve(cfg.mu.weights(), nu.weights(), &cfg.cost);
            let alpha = transport_alpha(nu, &cfg.mu, &cfg.cost);
            writeln!(out.summary, "alpha {alpha}").ok();
            Some(PlanReport { alpha, flow: p.flow, pivots: p.pivots })
        }
        None => None,
    };
    let rho = match &cfg.f {
        Some(f) => {
            check_len("f", f.len(), m)?;
            let v = rho_transport(f, &cfg.mu, &cfg.cost);
            writeln!(out.summary, "rho {v}").ok();
            Some(v)
        }
        None => None,
    };
    let control = match &cfg.field {
        Some(fs) => {
            let field = fs.build(m, "field")?;
            let control_value = control_value_transport(&field, &cfg.mu, &cfg.cost)?;
            let (rho_n, _) = rho_n_dense(&field, &spec)?;
            writeln!(out.summary, "control value {control_value} rho_n {rho_n}").ok();
            Some(ControlReport { n: field.n(), control_value, rho_n })
        }
        None => None,
    };
    if plan.is_none() && rho.is_none() && control.is_none() {
        return Err(CliError::Config("give at least one of `nu`, `f`, `field`".into()));
    }
    out.json("report.json", &TransportReport { plan, rho, control })?;
    Ok(out)
}
