//! The Toeplitz kernel: the single coefficient family `t_{-n}, t_{-n+1}, ...`
//! that fills every diagonal of `T`, together with its generating polynomial
//! `tau(z) = sum_k t_{k-n} z^k`, its mass and first moment.
//!
//! Coefficient `i` of a kernel is `t_{i-n}`, so `coeffs[0]` is the entry on
//! the outermost superdiagonal and `coeffs[n]` sits on the main diagonal.
//! An infinite family is represented by its first `K_max + n + 1` entries and
//! a declared bound on the discarded mass.

use std::cmp::Ordering;
use std::fmt;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::number::{ratio_to_f64, ratio_to_string, Number, ValueKind, Values};

/// Absolute tolerance for `mass = 1` and `gamma = n` decisions in float mode.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;
/// Grid used by [`check_root_convexity`] when callers do not pick one.
pub const DEFAULT_GRID_POINTS: usize = 1001;
/// Second-difference tolerance used with [`DEFAULT_GRID_POINTS`].
pub const DEFAULT_CONVEXITY_TOLERANCE: f64 = 1e-9;

/// Content hash identifying a kernel; traces carry it to name their source.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KernelId(pub String);

impl fmt::Display for KernelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzKernel {
    band_depth: usize,
    coeffs: Values,
    tail_mass_bound: f64,
}

/// On-disk kernel format: `{"n": 1, "coeffs": [...], "tail_mass_bound": 0}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelFile {
    pub n: usize,
    pub coeffs: Vec<Number>,
    #[serde(default)]
    pub tail_mass_bound: f64,
}

impl ToeplitzKernel {
    pub fn new(band_depth: usize, coeffs: Values, tail_mass_bound: f64) -> Result<Self> {
        if band_depth == 0 {
            return Err(Error::InvalidBandDepth);
        }
        if coeffs.is_empty() {
            return Err(Error::EmptyCoefficients);
        }
        if !(tail_mass_bound.is_finite() && tail_mass_bound >= 0.0) {
            return Err(Error::InvalidTailBound);
        }
        match &coeffs {
            Values::Float(v) => {
                if let Some(index) = v.iter().position(|c| !(c.is_finite() && *c >= 0.0)) {
                    return Err(Error::NegativeCoefficient { index });
                }
                if v[0] == 0.0 {
                    return Err(Error::ZeroLeadingCoefficient);
                }
            }
            Values::Exact(v) => {
                if let Some(index) = v.iter().position(Signed::is_negative) {
                    return Err(Error::NegativeCoefficient { index });
                }
                if v[0].is_zero() {
                    return Err(Error::ZeroLeadingCoefficient);
                }
            }
        }
        Ok(ToeplitzKernel {
            band_depth,
            coeffs,
            tail_mass_bound,
        })
    }

    pub fn from_f64(band_depth: usize, coeffs: &[f64], tail_mass_bound: f64) -> Result<Self> {
        Self::new(band_depth, Values::Float(coeffs.to_vec()), tail_mass_bound)
    }

    pub fn from_rationals(band_depth: usize, coeffs: Vec<BigRational>) -> Result<Self> {
        Self::new(band_depth, Values::Exact(coeffs), 0.0)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: KernelFile = serde_json::from_str(text)?;
        Self::new(file.n, Values::from_numbers(file.coeffs)?, file.tail_mass_bound)
    }

    pub fn to_file(&self) -> KernelFile {
        KernelFile {
            n: self.band_depth,
            coeffs: self.coeffs.numbers(),
            tail_mass_bound: self.tail_mass_bound,
        }
    }

    pub fn band_depth(&self) -> usize {
        self.band_depth
    }

    pub fn coeffs(&self) -> &Values {
        &self.coeffs
    }

    pub fn coeffs_f64(&self) -> Vec<f64> {
        self.coeffs.to_f64_vec()
    }

    pub fn tail_mass_bound(&self) -> f64 {
        self.tail_mass_bound
    }

    pub fn value_kind(&self) -> ValueKind {
        self.coeffs.kind()
    }

    /// `t_{-n}`.
    pub fn leading(&self) -> Number {
        self.coeffs.get(0).expect("kernel is never empty")
    }

    /// Same coefficients in the other arithmetic mode (floats convert through
    /// their shortest decimal form).
    pub fn to_kind(&self, kind: ValueKind) -> Result<Self> {
        Self::new(
            self.band_depth,
            self.coeffs.clone().into_kind(kind)?,
            self.tail_mass_bound,
        )
    }

    pub fn id(&self) -> KernelId {
        let mut hasher = Sha256::new();
        hasher.update(format!("n={};tail={};", self.band_depth, self.tail_mass_bound));
        match &self.coeffs {
            Values::Exact(v) => {
                for c in v {
                    hasher.update(ratio_to_string(c));
                    hasher.update(",");
                }
            }
            Values::Float(v) => {
                for c in v {
                    hasher.update(c.to_bits().to_le_bytes());
                }
            }
        }
        let digest = hasher.finalize();
        KernelId(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
    }

    /// `tau(1) = sum_k t_{k-n}` over the stored coefficients.
    pub fn mass(&self) -> Number {
        match &self.coeffs {
            Values::Exact(v) => Number::Exact(v.iter().sum()),
            Values::Float(v) => Number::Float(v.iter().sum()),
        }
    }

    /// `gamma = sum_{k>=1} k t_{k-n}`.
    pub fn first_moment(&self) -> Number {
        match &self.coeffs {
            Values::Exact(v) => Number::Exact(
                v.iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, c)| c * BigRational::from_integer(k.into()))
                    .sum(),
            ),
            Values::Float(v) => {
                Number::Float(v.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).sum())
            }
        }
    }

    pub fn tau(&self, z: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::OutOfDomain { z });
        }
        Ok(horner(&self.coeffs_f64(), z))
    }

    pub fn tau_exact(&self, z: &BigRational) -> Result<BigRational> {
        if z.is_negative() || *z > BigRational::from_integer(1.into()) {
            return Err(Error::OutOfDomain { z: ratio_to_f64(z) });
        }
        match &self.coeffs {
            Values::Exact(v) => Ok(v
                .iter()
                .rev()
                .fold(BigRational::zero(), |acc, c| acc * z + c)),
            Values::Float(_) => Err(Error::ModeMismatch(
                "exact evaluation requested on a float kernel".into(),
            )),
        }
    }

    /// `tau'(z)` from the coefficients.
    pub fn tau_derivative(&self, z: f64) -> f64 {
        let c = self.coeffs_f64();
        let d: Vec<f64> = c
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, ck)| k as f64 * ck)
            .collect();
        horner(&d, z)
    }

    /// Sign of `mass - 1`, honouring the truncation bound.
    ///
    /// The true mass lies in `[stored, stored + tail_mass_bound]`. The regime
    /// is decided only when that interval, widened by `tol`, sits on one side
    /// of 1, or contains 1 with no truncation slack.
    pub fn compare_mass_to_one(&self, tol: f64) -> Result<Ordering> {
        let tail = self.tail_mass_bound;
        if let (Number::Exact(m), true) = (self.mass(), tail == 0.0) {
            return Ok(m.cmp(&BigRational::from_integer(1.into())));
        }
        let m = self.mass().to_f64();
        if m - tol > 1.0 {
            Ok(Ordering::Greater)
        } else if m + tail + tol < 1.0 {
            Ok(Ordering::Less)
        } else if tail <= tol {
            Ok(Ordering::Equal)
        } else {
            Err(Error::IndeterminateMass)
        }
    }

    /// Sign of `gamma - n`: exact in rational mode, absolute `tol` otherwise.
    pub fn compare_moment_to_band(&self, tol: f64) -> Ordering {
        let n = self.band_depth;
        match self.first_moment() {
            Number::Exact(g) => g.cmp(&BigRational::from_integer(n.into())),
            Number::Float(g) => {
                let diff = g - n as f64;
                if diff.abs() <= tol {
                    Ordering::Equal
                } else if diff < 0.0 {
                    Ordering::Less
                } else {
                    Ordering::Greater
                }
            }
        }
    }
}

pub(crate) fn horner(coeffs: &[f64], z: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c)
}

pub fn make_kernel(band_depth: usize, coeffs: Values, tail_mass_bound: f64) -> Result<ToeplitzKernel> {
    ToeplitzKernel::new(band_depth, coeffs, tail_mass_bound)
}

pub fn mass(kernel: &ToeplitzKernel) -> Number {
    kernel.mass()
}

pub fn first_moment(kernel: &ToeplitzKernel) -> Number {
    kernel.first_moment()
}

pub fn tau_eval(kernel: &ToeplitzKernel, z: f64) -> Result<f64> {
    kernel.tau(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConvexityStatus {
    Pass,
    Fail,
    Indeterminate,
}

impl fmt::Display for ConvexityStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConvexityStatus::Pass => "PASS",
            ConvexityStatus::Fail => "FAIL",
            ConvexityStatus::Indeterminate => "INDETERMINATE",
        };
        f.write_str(s)
    }
}

/// Outcome of the grid convexity test for `tau^{1/n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub satisfied: ConvexityStatus,
    pub grid_points: usize,
    pub min_second_difference: f64,
    pub max_second_difference: f64,
}

/// Checks that `d/dz tau(z)^{1/n}` increases on `[0, 1]`, i.e. that
/// `tau^{1/n}` is convex, through second differences on a uniform grid.
///
/// For `n = 1` the condition holds for every nonnegative coefficient list and
/// the grid only supplies the reported extremes. For `n >= 2` a second
/// difference below `-tolerance` fails the check; a grid whose differences are
/// all within `tolerance` of zero but not all nonnegative is `Indeterminate`.
pub fn check_root_convexity(
    kernel: &ToeplitzKernel,
    grid_points: usize,
    tolerance: f64,
) -> Result<ConvexityReport> {
    if grid_points < 3 {
        return Err(Error::InvalidParameter(format!(
            "condition grid needs at least 3 points, got {grid_points}"
        )));
    }
    let n = kernel.band_depth();
    let coeffs = kernel.coeffs_f64();
    let step = 1.0 / (grid_points - 1) as f64;
    let root: Vec<f64> = (0..grid_points)
        .map(|i| {
            let tau = horner(&coeffs, i as f64 * step);
            if n == 1 {
                tau
            } else {
                tau.powf(1.0 / n as f64)
            }
        })
        .collect();
    let (min_d, max_d) = root
        .windows(3)
        .map(|w| w[0] - 2.0 * w[1] + w[2])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
            (lo.min(d), hi.max(d))
        });

    let satisfied = if n == 1 || min_d >= 0.0 {
        ConvexityStatus::Pass
    } else if min_d < -tolerance {
        ConvexityStatus::Fail
    } else if max_d.abs() <= tolerance {
        ConvexityStatus::Indeterminate
    } else {
        ConvexityStatus::Pass
    };
    Ok(ConvexityReport {
        satisfied,
        grid_points,
        min_second_difference: min_d,
        max_second_difference: max_d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::rational;

    fn k(n: usize, c: &[f64]) -> ToeplitzKernel {
        ToeplitzKernel::from_f64(n, c, 0.0).unwrap()
    }

    #[test]
    fn construction_examples() {
        let a = k(1, &[0.6, 0.3, 0.1]);
        assert!((a.mass().to_f64() - 1.0).abs() < 1e-15);
        let b = k(2, &[0.5, 0.2, 0.2, 0.1]);
        assert!((b.mass().to_f64() - 1.0).abs() < 1e-15);
        assert_eq!(
            ToeplitzKernel::from_f64(1, &[0.0, 0.5], 0.0),
            Err(Error::ZeroLeadingCoefficient)
        );
        assert_eq!(
            ToeplitzKernel::from_f64(1, &[0.5, -0.1], 0.0),
            Err(Error::NegativeCoefficient { index: 1 })
        );
        assert_eq!(ToeplitzKernel::from_f64(1, &[], 0.0), Err(Error::EmptyCoefficients));
        assert_eq!(ToeplitzKernel::from_f64(0, &[1.0], 0.0), Err(Error::InvalidBandDepth));
    }

    #[test]
    fn mass_and_moment_examples() {
        assert!((k(1, &[0.5, 0.3]).mass().to_f64() - 0.8).abs() < 1e-15);
        assert_eq!(k(1, &[1.0]).mass(), Number::Float(1.0));
        assert!((k(1, &[0.6, 0.3, 0.1]).first_moment().to_f64() - 0.5).abs() < 1e-15);
        assert_eq!(k(1, &[1.0]).first_moment(), Number::Float(0.0));
        assert!((k(2, &[0.5, 0.2, 0.2, 0.1]).first_moment().to_f64() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn tau_examples() {
        let a = k(1, &[0.6, 0.3, 0.1]);
        assert_eq!(a.tau(0.0).unwrap(), 0.6);
        assert!((a.tau(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(a.tau(1.5), Err(Error::OutOfDomain { z: 1.5 }));
        assert_eq!(a.tau(-0.1), Err(Error::OutOfDomain { z: -0.1 }));
        let b = ToeplitzKernel::from_rationals(1, vec![rational(1, 4), rational(0, 1), rational(3, 4)])
            .unwrap();
        assert_eq!(b.tau_exact(&rational(1, 3)).unwrap(), rational(1, 3));
        assert_eq!(b.tau_exact(&rational(1, 1)).unwrap(), b.mass().as_exact().unwrap().clone());
    }

    #[test]
    fn mass_decision_respects_truncation() {
        let exact = ToeplitzKernel::from_rationals(1, vec![rational(3, 5), rational(2, 5)]).unwrap();
        assert_eq!(exact.compare_mass_to_one(0.0).unwrap(), Ordering::Equal);
        let truncated = ToeplitzKernel::from_f64(1, &[0.6, 0.3, 0.0999], 0.01).unwrap();
        assert_eq!(truncated.compare_mass_to_one(1e-12), Err(Error::IndeterminateMass));
        let clearly_super = ToeplitzKernel::from_f64(1, &[1.2, 0.3], 0.01).unwrap();
        assert_eq!(clearly_super.compare_mass_to_one(1e-12).unwrap(), Ordering::Greater);
        let clearly_sub = ToeplitzKernel::from_f64(1, &[0.5, 0.3], 0.01).unwrap();
        assert_eq!(clearly_sub.compare_mass_to_one(1e-12).unwrap(), Ordering::Less);
    }

    #[test]
    fn condition_examples() {
        let r = check_root_convexity(&k(1, &[0.6, 0.3, 0.1]), 101, 1e-9).unwrap();
        assert_eq!(r.satisfied, ConvexityStatus::Pass);
        let r = check_root_convexity(&k(1, &[1.0]), 101, 1e-9).unwrap();
        assert_eq!(r.satisfied, ConvexityStatus::Pass);
        assert_eq!(r.min_second_difference, 0.0);
        // Regression value: sqrt(tau) has second differences in [2.5e-7, 3.3e-7].
        let r = check_root_convexity(&k(2, &[0.5, 0.2, 0.2, 0.1]), 1001, 1e-9).unwrap();
        assert_eq!(r.satisfied, ConvexityStatus::Pass);
        assert!(r.min_second_difference > 2.5e-7 && r.max_second_difference < 3.3e-7);
        assert!(check_root_convexity(&k(1, &[1.0]), 2, 1e-9).is_err());
    }

    #[test]
    fn concave_root_fails() {
        // sqrt(0.9 + 0.1 z) is strictly concave.
        let r = check_root_convexity(&k(2, &[0.9, 0.1]), 1001, 1e-12).unwrap();
        assert_eq!(r.satisfied, ConvexityStatus::Fail);
        assert!(r.min_second_difference < -1e-12);
    }

    #[test]
    fn kernel_json() {
        let a = ToeplitzKernel::from_json_str(r#"{"n": 1, "coeffs": ["3/5", "3/10", "1/10"]}"#).unwrap();
        assert_eq!(a.value_kind(), ValueKind::ExactRational);
        assert_eq!(a.mass(), Number::Exact(rational(1, 1)));
        assert_eq!(
            ToeplitzKernel::from_json_str(r#"{"n": 1, "coeffs": [0.6, "3/10"]}"#),
            Err(Error::MixedValueKinds)
        );
        assert_eq!(
            ToeplitzKernel::from_json_str(r#"{"n": 1, "coeffs": [0, 0.5]}"#),
            Err(Error::ZeroLeadingCoefficient)
        );
        assert_ne!(a.id(), k(1, &[0.6, 0.3, 0.1]).id());
    }
}
