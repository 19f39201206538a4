//! Boundedness regimes of positive solutions and the root analysis of
//! `z^n = w tau(z)` on the open unit interval.

use std::cmp::Ordering;

use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::coefficients::{
    check_root_convexity, ConvexityReport, ConvexityStatus, ToeplitzKernel,
    DEFAULT_CONVEXITY_TOLERANCE, DEFAULT_GRID_POINTS,
};
use crate::error::{Error, Result};
use crate::number::{Number, Values};

/// Left end of the bisection bracket; also its distance from 1 on the right.
pub const BRACKET_MARGIN: f64 = 1e-12;

/// A local maximum of `g` must exceed this to count as a sign change.
const ROOT_SIGN_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    /// Mass above 1: bounded, tends to zero.
    Supercritical,
    /// Mass 1 and `gamma < n`: bounded with a positive limit.
    CriticalBounded,
    /// Mass 1 and `gamma = n`: unbounded.
    CriticalDivergentEqual,
    /// Mass 1 and `gamma > n`: unbounded.
    CriticalDivergentHeavy,
    /// Mass below 1: unbounded.
    Subcritical,
}

impl Regime {
    pub fn is_bounded(self) -> bool {
        matches!(self, Regime::Supercritical | Regime::CriticalBounded)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub mass: Number,
    pub gamma: Number,
    pub band_depth: usize,
    /// `None` when the convexity hypothesis could not be confirmed.
    pub bounded: Option<bool>,
    pub limit_is_zero: Option<bool>,
    /// Limit of the solution with `x_0 = 1`; band depth 1, critical bounded only.
    pub limit_value: Option<Number>,
    pub convexity: ConvexityReport,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub fn classify(kernel: &ToeplitzKernel, tolerance: f64) -> Result<RegimeReport> {
    let regime = match kernel.compare_mass_to_one(tolerance)? {
        Ordering::Greater => Regime::Supercritical,
        Ordering::Less => Regime::Subcritical,
        Ordering::Equal => match kernel.compare_moment_to_band(tolerance) {
            Ordering::Less => Regime::CriticalBounded,
            Ordering::Equal => Regime::CriticalDivergentEqual,
            Ordering::Greater => Regime::CriticalDivergentHeavy,
        },
    };
    let convexity = check_root_convexity(kernel, DEFAULT_GRID_POINTS, DEFAULT_CONVEXITY_TOLERANCE)?;
    let mut warnings = Vec::new();
    let (bounded, limit_is_zero) = if convexity.satisfied == ConvexityStatus::Pass {
        (Some(regime.is_bounded()), Some(regime == Regime::Supercritical))
    } else {
        warnings.push(format!(
            "convexity of tau^(1/n) is {}; boundedness is not asserted",
            convexity.satisfied
        ));
        (None, None)
    };
    let limit_value = if kernel.band_depth() == 1 && regime == Regime::CriticalBounded {
        Some(limit_value_n1(kernel, &Number::Float(1.0))?)
    } else {
        None
    };
    Ok(RegimeReport {
        regime,
        mass: kernel.mass(),
        gamma: kernel.first_moment(),
        band_depth: kernel.band_depth(),
        bounded,
        limit_is_zero,
        limit_value,
        convexity,
        warnings,
    })
}

/// `lim x_k = x_0 t_{-1} / (1 - gamma)` for a critical kernel of band depth 1.
///
/// Exact kernels give an exact answer; `x0` is converted to the kernel's mode.
pub fn limit_value_n1(kernel: &ToeplitzKernel, x0: &Number) -> Result<Number> {
    if kernel.band_depth() != 1 {
        return Err(Error::WrongBandDepth { n: kernel.band_depth() });
    }
    if !x0.is_positive() {
        return Err(Error::NonpositiveSeed);
    }
    if kernel.compare_mass_to_one(crate::coefficients::DEFAULT_TOLERANCE)? != Ordering::Equal {
        return Err(Error::NotCritical);
    }
    if kernel.compare_moment_to_band(crate::coefficients::DEFAULT_TOLERANCE) != Ordering::Less {
        return Err(Error::MomentNotSubunit);
    }
    let x0 = x0.clone().into_kind(kernel.value_kind())?;
    Ok(match (kernel.coeffs(), kernel.first_moment(), x0) {
        (Values::Exact(c), Number::Exact(g), Number::Exact(x0)) => {
            Number::Exact(x0 * &c[0] / (BigRational::one() - g))
        }
        (Values::Float(c), Number::Float(g), Number::Float(x0)) => Number::Float(x0 * c[0] / (1.0 - g)),
        _ => unreachable!("modes agree"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootReport {
    pub root_exists: bool,
    pub root: Option<f64>,
    /// `|z^n - w tau(z)|` at the root, or at the point of closest approach
    /// when there is none.
    pub residual: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
}

/// Decides whether `z^n = w tau(z)` has a root in `(0, 1)` and localizes it.
///
/// Works with `g(z) = z - (w tau(z))^{1/n}`, which is concave once
/// `tau^{1/n}` is convex and negative near 0. If `g` is positive near 1 the
/// root is bracketed directly; otherwise the maximum of `g` is located by
/// golden-section search and a positive maximum brackets the smaller root.
pub fn find_root_in_unit_interval(kernel: &ToeplitzKernel, w: f64, tol: f64) -> Result<RootReport> {
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::InvalidParameter(format!("w must be positive, got {w}")));
    }
    if !(tol >= 4.0 * f64::EPSILON) || tol >= 0.5 {
        return Err(Error::ToleranceTooSmall { tol });
    }
    let convexity = check_root_convexity(kernel, DEFAULT_GRID_POINTS, DEFAULT_CONVEXITY_TOLERANCE)?;
    if convexity.satisfied != ConvexityStatus::Pass {
        return Err(Error::ConvexityFailed {
            status: convexity.satisfied.to_string(),
        });
    }
    let n = kernel.band_depth();
    let coeffs = kernel.coeffs_f64();
    let tau = |z: f64| crate::coefficients::horner(&coeffs, z);
    let g = |z: f64| {
        let v = w * tau(z);
        z - if n == 1 { v } else { v.powf(1.0 / n as f64) }
    };
    let residual = |z: f64| (z.powi(n as i32) - w * tau(z)).abs();

    let lo = BRACKET_MARGIN;
    let hi = 1.0 - BRACKET_MARGIN;
    if g(lo) >= 0.0 {
        return Err(Error::InvalidParameter(
            "g is not negative at the left end of the bracket".into(),
        ));
    }
    let mut iterations = 0;
    let right = if g(hi) > 0.0 {
        hi
    } else {
        let (zmax, gmax, its) = golden_max(&g, lo, hi, tol);
        iterations += its;
        if gmax <= ROOT_SIGN_THRESHOLD {
            return Ok(RootReport {
                root_exists: false,
                root: None,
                residual: residual(zmax),
                bracket: (lo, hi),
                iterations,
            });
        }
        zmax
    };
    let (mut a, mut b) = (lo, right);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if g(mid) < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
        iterations += 1;
    }
    let root = 0.5 * (a + b);
    Ok(RootReport {
        root_exists: true,
        root: Some(root),
        residual: residual(root),
        bracket: (a, b),
        iterations,
    })
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64, usize) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut its = 0;
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        its += 1;
    }
    let z = 0.5 * (a + b);
    let candidates = [(z, f(z)), (c, fc), (d, fd)];
    let best = candidates
        .into_iter()
        .fold((z, f64::NEG_INFINITY), |acc, (x, v)| if v > acc.1 { (x, v) } else { acc });
    (best.0, best.1, its)
}
