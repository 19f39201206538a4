//! Closed-form generating function `chi(z) = sum_k x_k z^k` of a solution and
//! its comparison with the truncated series of the computed trace.
//!
//! Multiplying the recurrence by `z^k` and summing by columns gives
//!
//! ```text
//! chi(z) = [sum_{k<n} x_k sum_{j=k+1}^{n} t_{-j} z^{n-j+k}] / [tau(z) - z^n]
//! ```
//!
//! which for `n = 1` is `t_{-1} x_0 / (tau(z) - z)`.

use serde::{Deserialize, Serialize};

use crate::classifier::classify;
use crate::coefficients::{horner, ToeplitzKernel, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::recurrence::{solve_forward, window_abs_max, Prefix};

/// Relative size of `tau(z) - z^n` below which `z` is treated as a pole.
pub const POLE_THRESHOLD: f64 = 1e-10;

/// Absolute slack added to the tail bound when judging consistency.
pub const SERIES_TOLERANCE: f64 = 1e-12;

/// Smallest truncation order accepted by [`chi_series_check`].
pub const MIN_SERIES_ORDER: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub z: f64,
    pub closed_form: f64,
    pub truncated_series: f64,
    pub abs_gap: f64,
    pub tail_bound: f64,
    pub consistent: bool,
}

fn check_z(z: f64) -> Result<()> {
    if (0.0..1.0).contains(&z) {
        Ok(())
    } else {
        Err(Error::OutOfDomain { z })
    }
}

fn check_prefix(kernel: &ToeplitzKernel, prefix: &Prefix) -> Result<Vec<f64>> {
    if prefix.len() != kernel.band_depth() {
        return Err(Error::PrefixLength {
            expected: kernel.band_depth(),
            got: prefix.len(),
        });
    }
    Ok(prefix.values().to_f64_vec())
}

/// `tau(z) - z^n`, or `PoleAtZ` when it is negligible against `tau(z)`.
pub(crate) fn denominator(kernel: &ToeplitzKernel, coeffs: &[f64], z: f64) -> Result<f64> {
    let tau = horner(coeffs, z);
    let d = tau - z.powi(kernel.band_depth() as i32);
    if d.abs() < POLE_THRESHOLD * tau.abs().max(1.0) {
        return Err(Error::PoleAtZ { z });
    }
    Ok(d)
}

/// Numerator `sum_{k<n} x_k sum_{j=k+1}^{n} t_{-j} z^{n-j+k}`.
pub(crate) fn numerator(coeffs: &[f64], n: usize, x: &[f64], z: f64) -> f64 {
    let mut total = 0.0;
    for (k, xk) in x.iter().enumerate() {
        let inner: f64 = (k + 1..=n)
            .map(|j| coeffs.get(n - j).copied().unwrap_or(0.0) * z.powi((n - j + k) as i32))
            .sum();
        total += xk * inner;
    }
    total
}

pub fn chi_closed_form(kernel: &ToeplitzKernel, prefix: &Prefix, z: f64) -> Result<f64> {
    check_z(z)?;
    let x = check_prefix(kernel, prefix)?;
    let coeffs = kernel.coeffs_f64();
    let d = denominator(kernel, &coeffs, z)?;
    Ok(numerator(&coeffs, kernel.band_depth(), &x, z) / d)
}

/// Band-depth-1 form `t_{-1} x_0 / (tau(z) - z)`.
pub fn chi_closed_form_n1(kernel: &ToeplitzKernel, x0: f64, z: f64) -> Result<f64> {
    if kernel.band_depth() != 1 {
        return Err(Error::WrongBandDepth { n: kernel.band_depth() });
    }
    check_z(z)?;
    let coeffs = kernel.coeffs_f64();
    let d = denominator(kernel, &coeffs, z)?;
    Ok(coeffs[0] * x0 / d)
}

/// Compares `sum_{k<=K} x_k z^k` with the closed form.
///
/// The tail `sum_{k>K} x_k z^k` is bounded by `sup_{K/2<k<=K} |x_k| z^{K+1}/(1-z)`,
/// which presumes the terms stay of that size past `K`. The check refuses to
/// produce that bound when the regime is unbounded, and also when the weighted
/// terms `|x_k| z^k` are larger on the second half of the trace than on the
/// first, since the series is then not visibly convergent at `z`.
pub fn chi_series_check(kernel: &ToeplitzKernel, prefix: &Prefix, z: f64, k_max: usize) -> Result<ConsistencyReport> {
    check_z(z)?;
    check_prefix(kernel, prefix)?;
    if k_max < MIN_SERIES_ORDER {
        return Err(Error::InvalidParameter(format!(
            "series order must be at least {MIN_SERIES_ORDER}, got {k_max}"
        )));
    }
    let report = classify(kernel, DEFAULT_TOLERANCE)?;
    if report.bounded == Some(false) {
        return Err(Error::UnboundedTailNotBoundable(format!(
            "regime {:?} has unbounded solutions",
            report.regime
        )));
    }
    let closed_form = chi_closed_form(kernel, prefix, z)?;
    let trace = solve_forward(kernel, prefix, k_max)?;
    let x = trace.to_f64_vec();
    let half = k_max / 2;
    let weighted_max = |range: std::ops::RangeInclusive<usize>| {
        range.fold(0.0f64, |m, k| m.max(x[k].abs() * z.powi(k as i32)))
    };
    let early = weighted_max(0..=half);
    let late = weighted_max(half + 1..=k_max);
    if !(late <= early) {
        return Err(Error::UnboundedTailNotBoundable(format!(
            "terms |x_k| z^k grow past k = {half} at z = {z}"
        )));
    }
    let truncated_series = x.iter().rev().fold(0.0, |acc, v| acc * z + v);
    let tail_bound = window_abs_max(&trace, half + 1, k_max) * z.powi(k_max as i32 + 1) / (1.0 - z);
    let abs_gap = (closed_form - truncated_series).abs();
    Ok(ConsistencyReport {
        z,
        closed_form,
        truncated_series,
        abs_gap,
        tail_bound,
        consistent: abs_gap <= tail_bound + SERIES_TOLERANCE,
    })
}
