//! Scalars and scalar sequences that are either exact rationals or doubles.
//!
//! Every input format accepts plain JSON numbers (float mode) or strings of
//! the form `"p/q"` (exact mode). Exact values always serialize back to
//! `"p/q"` so that no precision is lost on a round trip.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Arithmetic mode of a kernel, prefix, trace or distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ValueKind {
    ExactRational,
    Float,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Number {
    Exact(BigRational),
    Float(f64),
}

impl Number {
    pub fn kind(&self) -> ValueKind {
        match self {
            Number::Exact(_) => ValueKind::ExactRational,
            Number::Float(_) => ValueKind::Float,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Number::Exact(r) => ratio_to_f64(r),
            Number::Float(x) => *x,
        }
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Number::Exact(r) => Some(r),
            Number::Float(_) => None,
        }
    }

    pub fn is_positive(&self) -> bool {
        match self {
            Number::Exact(r) => r.is_positive(),
            Number::Float(x) => *x > 0.0,
        }
    }

    /// Converts to the requested mode. Floats become exact through their
    /// shortest decimal representation, so `0.6` maps to `3/5`.
    pub fn into_kind(self, kind: ValueKind) -> Result<Number> {
        match (self, kind) {
            (Number::Exact(r), ValueKind::Float) => Ok(Number::Float(ratio_to_f64(&r))),
            (Number::Float(x), ValueKind::ExactRational) => {
                Ok(Number::Exact(exact_from_f64_decimal(x)?))
            }
            (n, _) => Ok(n),
        }
    }

    /// Parses `"p/q"`, an integer or a decimal literal into an exact value.
    pub fn parse_exact(s: &str) -> Result<BigRational> {
        parse_rational(s)
    }
}

impl From<f64> for Number {
    fn from(x: f64) -> Self {
        Number::Float(x)
    }
}

impl From<BigRational> for Number {
    fn from(r: BigRational) -> Self {
        Number::Exact(r)
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Exact(r) => write!(f, "{}", ratio_to_string(r)),
            Number::Float(x) => write!(f, "{x}"),
        }
    }
}

impl FromStr for Number {
    type Err = Error;

    /// Strings containing `/` are exact; everything else is read as a double.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.contains('/') {
            Ok(Number::Exact(parse_rational(s)?))
        } else {
            s.parse::<f64>()
                .map(Number::Float)
                .map_err(|e| Error::Parse(format!("'{s}': {e}")))
        }
    }
}

impl Serialize for Number {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Number::Exact(r) => serializer.serialize_str(&ratio_to_string(r)),
            Number::Float(x) => serializer.serialize_f64(*x),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawNumber {
    Text(String),
    Float(f64),
}

impl<'de> Deserialize<'de> for Number {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        match RawNumber::deserialize(deserializer)? {
            RawNumber::Float(x) => Ok(Number::Float(x)),
            RawNumber::Text(s) => parse_rational(&s)
                .map(Number::Exact)
                .map_err(serde::de::Error::custom),
        }
    }
}

/// A homogeneous sequence of scalars.
#[derive(Debug, Clone, PartialEq)]
pub enum Values {
    Exact(Vec<BigRational>),
    Float(Vec<f64>),
}

impl Values {
    /// Builds a sequence from individually typed numbers, rejecting a mix of kinds.
    pub fn from_numbers(numbers: Vec<Number>) -> Result<Values> {
        let exact = numbers.iter().filter(|n| matches!(n, Number::Exact(_))).count();
        if exact == numbers.len() {
            Ok(Values::Exact(
                numbers
                    .into_iter()
                    .filter_map(|n| match n {
                        Number::Exact(r) => Some(r),
                        Number::Float(_) => None,
                    })
                    .collect(),
            ))
        } else if exact == 0 {
            Ok(Values::Float(numbers.iter().map(Number::to_f64).collect()))
        } else {
            Err(Error::MixedValueKinds)
        }
    }

    pub fn kind(&self) -> ValueKind {
        match self {
            Values::Exact(_) => ValueKind::ExactRational,
            Values::Float(_) => ValueKind::Float,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Values::Exact(v) => v.len(),
            Values::Float(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Option<Number> {
        match self {
            Values::Exact(v) => v.get(i).cloned().map(Number::Exact),
            Values::Float(v) => v.get(i).copied().map(Number::Float),
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        match self {
            Values::Exact(v) => v.iter().map(ratio_to_f64).collect(),
            Values::Float(v) => v.clone(),
        }
    }

    pub fn numbers(&self) -> Vec<Number> {
        (0..self.len()).filter_map(|i| self.get(i)).collect()
    }

    pub fn into_kind(self, kind: ValueKind) -> Result<Values> {
        match (self, kind) {
            (Values::Exact(v), ValueKind::Float) => {
                Ok(Values::Float(v.iter().map(ratio_to_f64).collect()))
            }
            (Values::Float(v), ValueKind::ExactRational) => Ok(Values::Exact(
                v.into_iter()
                    .map(exact_from_f64_decimal)
                    .collect::<Result<_>>()?,
            )),
            (v, _) => Ok(v),
        }
    }
}

impl Serialize for Values {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.numbers().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Values {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let numbers = Vec::<Number>::deserialize(deserializer)?;
        Values::from_numbers(numbers).map_err(serde::de::Error::custom)
    }
}

pub fn ratio_to_string(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Exact value of the shortest decimal that round-trips to `x`.
pub fn exact_from_f64_decimal(x: f64) -> Result<BigRational> {
    if !x.is_finite() {
        return Err(Error::Parse(format!("non-finite value {x} has no exact form")));
    }
    parse_decimal(&format!("{x}"))
}

fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p = parse_decimal(p.trim())?;
            let q = parse_decimal(q.trim())?;
            if q.is_zero() {
                return Err(Error::Parse(format!("'{s}': zero denominator")));
            }
            Ok(p / q)
        }
        None => parse_decimal(s),
    }
}

/// Parses an integer or decimal literal (optional sign, fraction and exponent).
fn parse_decimal(s: &str) -> Result<BigRational> {
    let bad = || Error::Parse(format!("'{s}' is not a rational or decimal literal"));
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (
            &s[..pos],
            s[pos + 1..].parse::<i32>().map_err(|_| bad())?,
        ),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut numer: BigInt = all_digits.parse().map_err(|_| bad())?;
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let value = if scale >= 0 {
        BigRational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(value)
}

#[cfg(test)]
pub(crate) fn rational(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}
