//! Finite state spaces, probability vectors, product tensors and type classes.
//!
//! Points of `E^n` are encoded row-major with `x_1` most significant, so the
//! last coordinate of a prefix indexes a contiguous block of `m` entries.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::ext::ext_dot;

/// Largest dense tensor the library will allocate (`m^n ≤ 2^24`).
pub const DENSE_CAP: usize = 1 << 24;

/// Inputs whose total mass is within this distance of one are renormalized.
pub const NORMALIZE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct FiniteSpace {
    labels: Vec<String>,
}

impl FiniteSpace {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return input("a finite space needs at least one point");
        }
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return input(format!("duplicate label {l:?}"));
            }
        }
        Ok(FiniteSpace { labels })
    }

    /// Space `{0, 1, …, m−1}` labelled by index.
    pub fn indexed(m: usize) -> Result<Self> {
        Self::new((0..m).map(|i| i.to_string()).collect())
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

impl TryFrom<Vec<String>> for FiniteSpace {
    type Error = Error;
    fn try_from(v: Vec<String>) -> Result<Self> {
        FiniteSpace::new(v)
    }
}

impl From<FiniteSpace> for Vec<String> {
    fn from(s: FiniteSpace) -> Self {
        s.labels
    }
}

fn check_mass(weights: &mut [f64], tol: f64) -> Result<()> {
    let mut sum = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::NotProbability(format!("entry {i} is {w}")));
        }
        sum += w;
    }
    if (sum - 1.0).abs() > tol {
        return Err(Error::NotProbability(format!("weights sum to {sum}")));
    }
    if sum != 1.0 {
        for w in weights.iter_mut() {
            *w /= sum;
        }
    }
    Ok(())
}

/// A probability vector on `{0, …, m−1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Dist {
    weights: Vec<f64>,
}

impl Dist {
    /// Validates nonnegativity and renormalizes if the mass is within `1e-9` of one.
    pub fn new(mut weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return input("empty probability vector");
        }
        check_mass(&mut weights, NORMALIZE_TOL)?;
        Ok(Dist { weights })
    }

    pub fn uniform(m: usize) -> Self {
        assert!(m > 0);
        Dist { weights: vec![1.0 / m as f64; m] }
    }

    pub fn point(m: usize, i: usize) -> Self {
        assert!(i < m);
        let mut weights = vec![0.0; m];
        weights[i] = 1.0;
        Dist { weights }
    }

    /// Normalizes an arbitrary nonnegative vector with positive mass.
    pub fn from_unnormalized(mut weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::NotProbability(format!("cannot normalize mass {sum}")));
        }
        for w in &mut weights {
            *w /= sum;
        }
        Ok(Dist { weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// `∫ f dν` over extended reals.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        assert_eq!(f.len(), self.len());
        ext_dot(&self.weights, f)
    }

    /// Is `self ≪ other`?
    pub fn abs_cont(&self, other: &Dist) -> bool {
        self.weights.iter().zip(&other.weights).all(|(&a, &b)| a == 0.0 || b > 0.0)
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.weights[i] > 0.0).collect()
    }

    /// `Σ tᵢ νᵢ` for weights `t` on the simplex.
    pub fn mixture(components: &[&Dist], t: &[f64]) -> Result<Dist> {
        if components.is_empty() || components.len() != t.len() {
            return input("mixture needs one weight per component");
        }
        let m = components[0].len();
        let mut w = vec![0.0; m];
        for (c, &ti) in components.iter().zip(t) {
            if c.len() != m {
                return input("mixture components live on different spaces");
            }
            for (wi, ci) in w.iter_mut().zip(&c.weights) {
                *wi += ti * ci;
            }
        }
        Dist::from_unnormalized(w)
    }
}

impl TryFrom<Vec<f64>> for Dist {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Dist::new(v)
    }
}

impl From<Dist> for Vec<f64> {
    fn from(d: Dist) -> Self {
        d.weights
    }
}

/// `m^n`, or an error when it exceeds [`DENSE_CAP`].
pub fn dense_size(m: usize, n: usize) -> Result<usize> {
    let size = (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size > DENSE_CAP as u128 {
        return Err(Error::DenseCapExceeded { size, cap: DENSE_CAP });
    }
    Ok(size as usize)
}

/// Decode a flat index into `(x_1, …, x_n)`.
pub fn decode(mut idx: usize, m: usize, n: usize) -> Vec<usize> {
    let mut x = vec![0; n];
    for k in (0..n).rev() {
        x[k] = idx % m;
        idx /= m;
    }
    x
}

pub fn encode(x: &[usize], m: usize) -> usize {
    x.iter().fold(0, |acc, &xi| acc * m + xi)
}

/// A probability tensor on `E^n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProductDist {
    n: usize,
    m: usize,
    tensor: Vec<f64>,
}

impl ProductDist {
    pub fn new(n: usize, m: usize, mut tensor: Vec<f64>) -> Result<Self> {
        if n == 0 || m == 0 {
            return input("product distribution needs n ≥ 1 and m ≥ 1");
        }
        let size = dense_size(m, n)?;
        if tensor.len() != size {
            return input(format!("tensor has {} entries, expected {size}", tensor.len()));
        }
        check_mass(&mut tensor, NORMALIZE_TOL)?;
        Ok(ProductDist { n, m, tensor })
    }

    /// `μ^{⊗n}`.
    pub fn iid(mu: &Dist, n: usize) -> Result<Self> {
        let m = mu.len();
        let size = dense_size(m, n)?;
        let mut tensor = vec![1.0; size];
        for (idx, t) in tensor.iter_mut().enumerate() {
            let mut r = idx;
            for _ in 0..n {
                *t *= mu.get(r % m);
                r /= m;
            }
        }
        Ok(ProductDist { n, m, tensor })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn tensor(&self) -> &[f64] {
        &self.tensor
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        ext_dot(&self.tensor, f)
    }

    /// Marginal mass of every prefix of length `k` (k = 0 gives `[1]`).
    pub fn prefix_marginal(&self, k: usize) -> Vec<f64> {
        assert!(k <= self.n);
        let block = self.m.pow((self.n - k) as u32);
        self.tensor.chunks(block).map(|c| c.iter().sum()).collect()
    }
}

/// Stage-`k` conditional law of `x_k` given `(x_1, …, x_{k−1})`, for `k ≥ 2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Kernel {
    stage: usize,
    m: usize,
    rows: Vec<Dist>,
}

impl Kernel {
    pub fn new(stage: usize, m: usize, rows: Vec<Dist>) -> Result<Self> {
        if stage < 2 {
            return input("kernels start at stage 2");
        }
        let expected = dense_size(m, stage - 1)?;
        if rows.len() != expected {
            return input(format!("stage {stage} kernel needs {expected} rows, got {}", rows.len()));
        }
        if rows.iter().any(|d| d.len() != m) {
            return input("kernel row on the wrong space");
        }
        Ok(Kernel { stage, m, rows })
    }

    /// Kernel that ignores the prefix.
    pub fn constant(stage: usize, d: &Dist) -> Result<Self> {
        let m = d.len();
        let rows = vec![d.clone(); dense_size(m, stage - 1)?];
        Kernel::new(stage, m, rows)
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn rows(&self) -> &[Dist] {
        &self.rows
    }

    pub fn at(&self, prefix: usize) -> &Dist {
        &self.rows[prefix]
    }
}

/// First marginal and the kernels for stages `2..=n`.
///
/// Zero-probability prefixes get the uniform kernel.
pub fn disintegrate(nu: &ProductDist) -> (Dist, Vec<Kernel>) {
    let m = nu.m;
    let first = Dist::from_unnormalized(nu.prefix_marginal(1)).expect("valid tensor");
    let mut kernels = Vec::with_capacity(nu.n.saturating_sub(1));
    let mut prev = nu.prefix_marginal(1);
    for k in 2..=nu.n {
        let cur = nu.prefix_marginal(k);
        let rows = prev
            .iter()
            .enumerate()
            .map(|(p, &mass)| {
                if mass > 0.0 {
                    let block = &cur[p * m..(p + 1) * m];
                    Dist::from_unnormalized(block.to_vec()).unwrap_or_else(|_| Dist::uniform(m))
                } else {
                    Dist::uniform(m)
                }
            })
            .collect();
        kernels.push(Kernel { stage: k, m, rows });
        prev = cur;
    }
    (first, kernels)
}

/// Inverse of [`disintegrate`]: the joint law built from a first marginal and kernels.
pub fn compose(first: &Dist, kernels: &[Kernel]) -> Result<ProductDist> {
    let m = first.len();
    let mut tensor = first.weights().to_vec();
    for (j, k) in kernels.iter().enumerate() {
        if k.stage != j + 2 || k.m != m {
            return input(format!("kernel {j} has stage {} on a {}-point space", k.stage, k.m));
        }
        let mut next = vec![0.0; tensor.len() * m];
        for (p, &mass) in tensor.iter().enumerate() {
            for (y, &w) in k.rows[p].weights().iter().enumerate() {
                next[p * m + y] = mass * w;
            }
        }
        tensor = next;
    }
    ProductDist::new(kernels.len() + 1, m, tensor)
}

/// `L_n = (1/n) Σ δ_{x_i}` on a space of size `m`.
pub fn empirical_measure(x: &[usize], m: usize) -> Result<Dist> {
    if x.is_empty() {
        return input("empirical measure of an empty sample");
    }
    let mut counts = vec![0usize; m];
    for &xi in x {
        if xi >= m {
            return input(format!("index {xi} out of range for a {m}-point space"));
        }
        counts[xi] += 1;
    }
    let n = x.len() as f64;
    Ok(Dist { weights: counts.into_iter().map(|c| c as f64 / n).collect() })
}

/// Occupancy vector of a sequence.
pub fn occupancy(x: &[usize], m: usize) -> Vec<usize> {
    let mut c = vec![0; m];
    for &xi in x {
        c[xi] += 1;
    }
    c
}

/// All compositions of `n` into `m` nonnegative parts, lexicographically decreasing in the first part.
pub fn compositions(n: usize, m: usize) -> Vec<Vec<usize>> {
    fn rec(rest: usize, slots: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            cur.push(rest);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for first in (0..=rest).rev() {
            cur.push(first);
            rec(rest - first, slots - 1, cur, out);
            cur.pop();
        }
    }
    assert!(m >= 1);
    let mut out = Vec::new();
    rec(n, m, &mut Vec::with_capacity(m), &mut out);
    out
}

/// Multinomial coefficient `n! / Π cᵢ!`; exact while it fits in 64 bits.
pub fn multinomial(c: &[usize]) -> f64 {
    let mut exact: Option<u128> = Some(1);
    let mut approx = 1.0f64;
    let mut total = 0usize;
    for &ci in c {
        for j in 1..=ci {
            total += 1;
            // C(total, j) built incrementally: multiply by total / j.
            exact = exact.and_then(|e| e.checked_mul(total as u128)).map(|e| e / j as u128);
            approx *= total as f64 / j as f64;
        }
    }
    match exact {
        Some(e) if e <= u64::MAX as u128 => e as f64,
        _ => approx,
    }
}

/// Type classes of `E^n` with their sizes; the sizes sum to `m^n`.
pub fn type_classes(n: usize, m: usize) -> Vec<(Vec<usize>, f64)> {
    compositions(n, m)
        .into_iter()
        .map(|c| {
            let mult = multinomial(&c);
            (c, mult)
        })
        .collect()
}

/// `log` of the multinomial coefficient via log-gamma, for large `n`.
pub fn ln_multinomial(c: &[usize]) -> f64 {
    let n: usize = c.iter().sum();
    statrs::function::gamma::ln_gamma(n as f64 + 1.0)
        - c.iter().map(|&ci| statrs::function::gamma::ln_gamma(ci as f64 + 1.0)).sum::<f64>()
}

/// Index lookup for the compositions of a fixed total.
#[derive(Clone, Debug)]
pub struct TypeIndex {
    classes: Vec<Vec<usize>>,
    lookup: HashMap<Vec<usize>, usize>,
}

impl TypeIndex {
    pub fn new(n: usize, m: usize) -> Self {
        let classes = compositions(n, m);
        let lookup = classes.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        TypeIndex { classes, lookup }
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn index(&self, c: &[usize]) -> Option<usize> {
        self.lookup.get(c).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Repr {
    Dense(#[serde(with = "crate::ext::vec_f64")] Vec<f64>),
    Symmetric {
        classes: Vec<Vec<usize>>,
        #[serde(with = "crate::ext::vec_f64")]
        values: Vec<f64>,
    },
}

/// A real (extended) function on `E^n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RealFieldN {
    n: usize,
    m: usize,
    repr: Repr,
}

fn check_no_nan(v: &[f64]) -> Result<()> {
    if v.iter().any(|x| x.is_nan()) {
        return input("field contains NaN");
    }
    Ok(())
}

impl RealFieldN {
    pub fn dense(n: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        let size = dense_size(m, n)?;
        if values.len() != size {
            return input(format!("dense field has {} entries, expected {size}", values.len()));
        }
        check_no_nan(&values)?;
        Ok(RealFieldN { n, m, repr: Repr::Dense(values) })
    }

    pub fn dense_from_fn(n: usize, m: usize, f: impl Fn(&[usize]) -> f64) -> Result<Self> {
        let size = dense_size(m, n)?;
        let values = (0..size).map(|i| f(&decode(i, m, n))).collect();
        Self::dense(n, m, values)
    }

    /// Field given on type classes, in the order of [`compositions`].
    pub fn symmetric(n: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        let classes = compositions(n, m);
        if values.len() != classes.len() {
            return input(format!("symmetric field needs {} values, got {}", classes.len(), values.len()));
        }
        check_no_nan(&values)?;
        Ok(RealFieldN { n, m, repr: Repr::Symmetric { classes, values } })
    }

    pub fn symmetric_from_fn(n: usize, m: usize, f: impl Fn(&[usize]) -> f64) -> Result<Self> {
        let values = compositions(n, m).iter().map(|c| f(c)).collect();
        Self::symmetric(n, m, values)
    }

    /// `x ↦ n·F(L_n(x))` stored on type classes.
    pub fn from_empirical_functional(n: usize, m: usize, big_f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::symmetric_from_fn(n, m, |c| {
            let nu: Vec<f64> = c.iter().map(|&ci| ci as f64 / n as f64).collect();
            n as f64 * big_f(&nu)
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn repr(&self) -> &Repr {
        &self.repr
    }

    pub fn is_symmetric_repr(&self) -> bool {
        matches!(self.repr, Repr::Symmetric { .. })
    }

    pub fn dense_values(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::Dense(v) => Some(v),
            Repr::Symmetric { .. } => None,
        }
    }

    /// Expand to the dense representation (subject to the cap).
    pub fn to_dense(&self) -> Result<RealFieldN> {
        match &self.repr {
            Repr::Dense(_) => Ok(self.clone()),
            Repr::Symmetric { classes, values } => {
                let index: HashMap<&[usize], usize> =
                    classes.iter().enumerate().map(|(i, c)| (c.as_slice(), i)).collect();
                Self::dense_from_fn(self.n, self.m, |x| values[index[occupancy(x, self.m).as_slice()]])
            }
        }
    }

    /// Compress a permutation-invariant dense field; rejects non-symmetric input.
    pub fn to_symmetric(&self) -> Result<RealFieldN> {
        let values = match &self.repr {
            Repr::Symmetric { .. } => return Ok(self.clone()),
            Repr::Dense(v) => v,
        };
        let index = TypeIndex::new(self.n, self.m);
        let mut out: Vec<Option<f64>> = vec![None; index.len()];
        for (i, &v) in values.iter().enumerate() {
            let c = occupancy(&decode(i, self.m, self.n), self.m);
            let slot = &mut out[index.index(&c).expect("composition")];
            match *slot {
                None => *slot = Some(v),
                Some(prev) => {
                    let same = prev == v || (prev - v).abs() <= 1e-12 * (1.0 + prev.abs());
                    if !same {
                        return input(format!("field is not permutation-invariant at type {c:?}"));
                    }
                }
            }
        }
        let values = out.into_iter().map(|v| v.expect("every class is hit")).collect();
        Self::symmetric(self.n, self.m, values)
    }

    /// Entrywise value at a point of `E^n`.
    pub fn at(&self, x: &[usize]) -> f64 {
        match &self.repr {
            Repr::Dense(v) => v[encode(x, self.m)],
            Repr::Symmetric { classes, values } => {
                let c = occupancy(x, self.m);
                let i = classes.iter().position(|k| *k == c).expect("composition");
                values[i]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn empirical_examples() {
        let d = empirical_measure(&[0, 0, 1, 0], 2).unwrap();
        assert_eq!(d.weights(), &[0.75, 0.25]);
        assert_eq!(empirical_measure(&[0], 2).unwrap().weights(), &[1.0, 0.0]);
        let d = empirical_measure(&[2, 1, 0, 2, 2, 1], 3).unwrap();
        assert_abs_diff_eq!(d.get(0), 1.0 / 6.0);
        assert_abs_diff_eq!(d.get(1), 2.0 / 6.0);
        assert_abs_diff_eq!(d.get(2), 3.0 / 6.0);
        assert!(empirical_measure(&[0, 3], 3).is_err());
    }

    #[test]
    fn dist_validation() {
        assert!(Dist::new(vec![0.5, 0.5 + 5e-10]).is_ok());
        assert!(Dist::new(vec![0.5, 0.6]).is_err());
        assert!(Dist::new(vec![1.5, -0.5]).is_err());
        let d = Dist::new(vec![0.3, 0.7 + 1e-10]).unwrap();
        assert_abs_diff_eq!(d.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn labels_must_be_distinct() {
        assert!(FiniteSpace::new(vec!["a".into(), "a".into()]).is_err());
        let s = FiniteSpace::new(vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(s.index_of("b"), Some(1));
    }

    #[test]
    fn disintegrate_product_and_point_mass() {
        let mu = Dist::new(vec![0.3, 0.7]).unwrap();
        let nu = ProductDist::iid(&mu, 2).unwrap();
        let (first, ks) = disintegrate(&nu);
        assert_abs_diff_eq!(first.get(0), 0.3, epsilon = 1e-15);
        for row in ks[0].rows() {
            assert_abs_diff_eq!(row.get(1), 0.7, epsilon = 1e-15);
        }

        let delta = ProductDist::new(2, 2, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let (first, ks) = disintegrate(&delta);
        assert_eq!(first.weights(), &[1.0, 0.0]);
        assert_eq!(ks[0].at(0).weights(), &[0.0, 1.0]);
        // unreachable prefix → uniform
        assert_eq!(ks[0].at(1).weights(), &[0.5, 0.5]);
    }

    #[test]
    fn compose_round_trip() {
        let nu = ProductDist::new(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let (first, ks) = disintegrate(&nu);
        assert_abs_diff_eq!(ks[0].at(0).get(1), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ks[0].at(1).get(0), 3.0 / 7.0, epsilon = 1e-15);
        let back = compose(&first, &ks).unwrap();
        for (a, b) in back.tensor().iter().zip(nu.tensor()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn compose_shape_mismatch() {
        let k = Kernel::constant(2, &Dist::uniform(3)).unwrap();
        assert!(compose(&Dist::uniform(2), &[k]).is_err());
    }

    #[test]
    fn type_class_examples() {
        let t = type_classes(2, 2);
        assert_eq!(t, vec![(vec![2, 0], 1.0), (vec![1, 1], 2.0), (vec![0, 2], 1.0)]);
        assert_eq!(type_classes(1, 3).len(), 3);
        let mults: Vec<f64> = type_classes(4, 2).into_iter().map(|(_, k)| k).collect();
        assert_eq!(mults, vec![1.0, 4.0, 6.0, 4.0, 1.0]);
    }

    #[test]
    fn multinomial_large_is_accurate() {
        let c = [40, 30, 30];
        let exact = ln_multinomial(&c).exp();
        assert!((multinomial(&c) / exact - 1.0).abs() < 1e-12);
        // C(200,100) overflows u64; floating path
        let v = multinomial(&[100, 100]);
        let reference = ln_multinomial(&[100, 100]).exp();
        assert!((v / reference - 1.0).abs() < 1e-11);
    }

    #[test]
    fn dense_cap_enforced() {
        assert!(matches!(dense_size(2, 25), Err(Error::DenseCapExceeded { .. })));
        assert_eq!(dense_size(2, 24).unwrap(), 1 << 24);
    }

    #[test]
    fn symmetric_dense_round_trip() {
        let f = RealFieldN::from_empirical_functional(3, 2, |nu| nu[0] * nu[0]).unwrap();
        let d = f.to_dense().unwrap();
        assert_abs_diff_eq!(d.at(&[0, 1, 0]), 3.0 * 4.0 / 9.0, epsilon = 1e-15);
        assert_eq!(d.to_symmetric().unwrap(), f);
        let bad = RealFieldN::dense(2, 2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!(bad.to_symmetric().is_err());
    }
}
