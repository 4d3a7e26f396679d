//! Extended reals `ℝ ∪ {±∞}` with the convention `∞ − ∞ = −∞`.
//!
//! IEEE arithmetic would produce NaN for `∞ + (−∞)`; every operation here
//! resolves that case to `−∞` instead, so an [`ExtReal`] is never NaN.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct ExtReal(f64);

impl ExtReal {
    pub const INFINITY: ExtReal = ExtReal(f64::INFINITY);
    pub const NEG_INFINITY: ExtReal = ExtReal(f64::NEG_INFINITY);
    pub const ZERO: ExtReal = ExtReal(0.0);

    /// Panics on NaN.
    pub fn new(v: f64) -> Self {
        assert!(!v.is_nan(), "ExtReal cannot hold NaN");
        ExtReal(v)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn is_pos_inf(self) -> bool {
        self.0 == f64::INFINITY
    }

    pub fn is_neg_inf(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn total_cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Sum under the `∞ − ∞ = −∞` convention.
#[inline]
pub fn ext_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        a + b
    }
}

/// Difference under the `∞ − ∞ = −∞` convention.
#[inline]
pub fn ext_sub(a: f64, b: f64) -> f64 {
    ext_add(a, -b)
}

/// Product with `0 · (±∞) = 0`, the measure-theoretic convention for weights.
#[inline]
pub fn weight_mul(w: f64, v: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w * v
    }
}

/// `Σ wᵢ vᵢ` over extended reals; zero weights drop out and any `−∞` term wins.
pub fn ext_dot(weights: &[f64], values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&w, &v) in weights.iter().zip(values) {
        acc = ext_add(acc, weight_mul(w, v));
    }
    acc
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> Self {
        ExtReal::new(v)
    }
}

impl From<ExtReal> for f64 {
    fn from(v: ExtReal) -> Self {
        v.0
    }
}

impl Add for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: Self) -> Self {
        ExtReal(ext_add(self.0, rhs.0))
    }
}

impl Sub for ExtReal {
    type Output = ExtReal;
    fn sub(self, rhs: Self) -> Self {
        ExtReal(ext_sub(self.0, rhs.0))
    }
}

impl Neg for ExtReal {
    type Output = ExtReal;
    fn neg(self) -> Self {
        ExtReal(-self.0)
    }
}

impl Mul<f64> for ExtReal {
    type Output = ExtReal;
    /// Scalar multiple; `0 · ±∞ = 0`.
    fn mul(self, rhs: f64) -> Self {
        assert!(!rhs.is_nan());
        ExtReal(weight_mul(rhs, self.0))
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_pos_inf() {
            write!(f, "inf")
        } else if self.is_neg_inf() {
            write!(f, "-inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Infinite values serialize as the strings `"inf"` / `"-inf"`.
impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        serialize_f64(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        deserialize_f64(d).map(ExtReal)
    }
}

/// Serialize an `f64` that may be infinite (JSON has no infinity literal).
pub fn serialize_f64<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if *v == f64::INFINITY {
        s.serialize_str("inf")
    } else if *v == f64::NEG_INFINITY {
        s.serialize_str("-inf")
    } else {
        s.serialize_f64(*v)
    }
}

/// Deserialize a number, accepting `"inf"`, `"+inf"`, `"-inf"` string literals.
pub fn deserialize_f64<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum NumOrStr {
        Num(f64),
        Str(String),
    }
    match NumOrStr::deserialize(d)? {
        NumOrStr::Num(v) => Ok(v),
        NumOrStr::Str(s) => match s.trim() {
            "inf" | "+inf" | "Infinity" | "+Infinity" => Ok(f64::INFINITY),
            "-inf" | "-Infinity" => Ok(f64::NEG_INFINITY),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|v| !v.is_nan())
                .ok_or_else(|| serde::de::Error::custom(format!("expected a number or \"inf\", got {other:?}"))),
        },
    }
}

/// serde helpers for a single `f64` field that may be infinite.
pub mod serde_f64_field {
    pub use super::{deserialize_f64 as deserialize, serialize_f64 as serialize};
}

/// serde helpers for `Vec<f64>` fields that may contain infinities.
pub mod vec_f64 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::ExtReal;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let wrapped: Vec<ExtReal> = v.iter().map(|&x| ExtReal(x)).collect();
        wrapped.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<ExtReal>::deserialize(d)?.into_iter().map(|x| x.0).collect())
    }
}

/// serde helpers for `Vec<Vec<f64>>` fields (cost matrices) that may contain infinities.
pub mod mat_f64 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::ExtReal;

    pub fn serialize<S: Serializer>(v: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let wrapped: Vec<Vec<ExtReal>> =
            v.iter().map(|row| row.iter().map(|&x| ExtReal(x)).collect()).collect();
        wrapped.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        Ok(Vec::<Vec<ExtReal>>::deserialize(d)?
            .into_iter()
            .map(|row| row.into_iter().map(|x| x.0).collect())
            .collect())
    }
}
