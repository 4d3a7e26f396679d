//! Run configurations. Every struct rejects unknown keys.

use serde::de::DeserializeOwned;
use serde::Deserialize;

use sanov_dual::cramer::SampleLaw;
use sanov_dual::ext::vec_f64;
use sanov_dual::mc::azuma::{AzumaMethod, IncrementFamily};
use sanov_dual::mc::saa::{Growth, SaaInstance};
use sanov_dual::mc::Sampler;
use sanov_dual::rho::OceFn;
use sanov_dual::{AlphaSpec, Dist, RealFieldN};

use crate::error::{CliError, CliResult};

/// Deserializes `bytes`, reporting the path of the offending key on failure.
pub fn parse<T: DeserializeOwned>(bytes: &[u8]) -> CliResult<T> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| CliError::ConfigAt {
        path: e.path().to_string(),
        msg: e.into_inner().to_string(),
    })
}

/// Attaches a config path to a validation failure of the engine.
pub fn at<T>(path: &str, r: sanov_dual::Result<T>) -> CliResult<T> {
    r.map_err(|e| match e {
        sanov_dual::Error::Numeric(_) | sanov_dual::Error::Inconclusive(_) => CliError::Engine(e),
        other => CliError::ConfigAt { path: path.to_string(), msg: other.to_string() },
    })
}

fn bad(path: &str, msg: impl Into<String>) -> CliError {
    CliError::ConfigAt { path: path.to_string(), msg: msg.into() }
}

/// A functional `F` on the simplex.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum Functional {
    Constant { c: f64 },
    /// `F(ν) = Σ fᵢ νᵢ`.
    Linear { f: Vec<f64> },
    /// `F(ν) = −scale·(ν_index − center)²`.
    NegSquare { index: usize, center: f64, scale: f64 },
    /// `F(ν) = −scale·|ν_index − center|`.
    NegAbs { index: usize, center: f64, scale: f64 },
}

impl Functional {
    pub fn eval(&self, nu: &[f64]) -> f64 {
        match self {
            Functional::Constant { c } => *c,
            Functional::Linear { f } => f.iter().zip(nu).map(|(a, b)| a * b).sum(),
            Functional::NegSquare { index, center, scale } => -scale * (nu[*index] - center).powi(2),
            Functional::NegAbs { index, center, scale } => -scale * (nu[*index] - center).abs(),
        }
    }

    pub fn check(&self, m: usize, path: &str) -> CliResult<()> {
        let ok = match self {
            Functional::Constant { c } => c.is_finite(),
            Functional::Linear { f } => f.len() == m && f.iter().all(|x| x.is_finite()),
            Functional::NegSquare { index, center, scale } | Functional::NegAbs { index, center, scale } => {
                *index < m && center.is_finite() && scale.is_finite() && *scale >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(bad(path, format!("functional does not fit a space of {m} points")))
        }
    }
}

/// A function on `E^n`.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum FieldSpec {
    /// Row-major values, `x_1` most significant.
    Dense {
        n: usize,
        #[serde(with = "vec_f64")]
        values: Vec<f64>,
    },
    /// `x ↦ n·F(L_n(x))`.
    Empirical { n: usize, functional: Functional },
}

impl FieldSpec {
    pub fn build(&self, m: usize, path: &str) -> CliResult<RealFieldN> {
        match self {
            FieldSpec::Dense { n, values } => at(path, RealFieldN::dense(*n, m, values.clone())),
            FieldSpec::Empirical { n, functional } => {
                functional.check(m, &format!("{path}.functional"))?;
                at(path, RealFieldN::from_empirical_functional(*n, m, |nu| functional.eval(nu)))
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OceConfig {
    pub mu: Dist,
    pub phi: OceFn,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhoConfig {
    #[serde(default)]
    pub spec: Option<AlphaSpec>,
    #[serde(default)]
    pub oce: Option<OceConfig>,
    #[serde(with = "vec_f64")]
    pub f: Vec<f64>,
    /// Use projected-gradient maximization instead of the closed form.
    #[serde(default)]
    pub generic: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SanovConfig {
    pub spec: AlphaSpec,
    pub functional: Functional,
    pub schedule: Vec<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundQuery {
    pub r: f64,
    pub n: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CramerConfig {
    pub law: SampleLaw,
    pub q: f64,
    pub dual_grid: Vec<f64>,
    pub primal_grid: Vec<f64>,
    #[serde(default)]
    pub bound: Option<BoundQuery>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum TailboundConfig {
    /// `P(S_n/n ≥ r)` for i.i.d. draws against `(M_q/(r − M_q))^q n^{1−q}`.
    Iid {
        sampler: Sampler,
        q: f64,
        /// Absolute level.
        #[serde(default)]
        r: Option<f64>,
        /// Level as an offset above `M_q`.
        #[serde(default)]
        r_above_mq: Option<f64>,
        schedule: Vec<usize>,
        reps: usize,
        /// Largest acceptable one-sided upper confidence bound on the slope.
        #[serde(default)]
        slope_max: Option<f64>,
        /// Multiplier on the analytic bound in the per-cell check.
        #[serde(default)]
        bound_slack: Option<f64>,
    },
    /// Martingale increments against `exp(−n φ*(r))`.
    Azuma {
        family: IncrementFamily,
        r: f64,
        schedule: Vec<usize>,
        reps: usize,
        method: AzumaMethod,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArgminConfig {
    pub phi: Growth,
    /// Threshold for `φ(|x̂_n − x̂|)`; defaults to the instance's `eps`.
    #[serde(default)]
    pub eps: Option<f64>,
    pub schedule: Vec<usize>,
    pub reps: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossCheckConfig {
    /// Finite-support instance.
    pub instance: SaaInstance,
    pub n: usize,
    pub reps: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaaConfig {
    pub instance: SaaInstance,
    pub schedule: Vec<usize>,
    pub reps: usize,
    #[serde(default)]
    pub argmin: Option<ArgminConfig>,
    #[serde(default)]
    pub cross_check: Option<CrossCheckConfig>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperhedgeConfig {
    pub spec: AlphaSpec,
    pub field: FieldSpec,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportConfig {
    pub mu: Dist,
    #[serde(with = "sanov_dual::ext::mat_f64")]
    pub cost: Vec<Vec<f64>>,
    #[serde(default)]
    pub nu: Option<Dist>,
    #[serde(default, with = "opt_vec_f64")]
    pub f: Option<Vec<f64>>,
    #[serde(default)]
    pub field: Option<FieldSpec>,
}

mod opt_vec_f64 {
    use serde::{Deserialize, Deserializer};

    use sanov_dual::ExtReal;

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
        Ok(Option::<Vec<ExtReal>>::deserialize(d)?.map(|v| v.into_iter().map(f64::from).collect()))
    }
}
