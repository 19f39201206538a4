//! Tauberian checks on solutions: the partial-sum slope `S_N / N -> A`, the
//! Abel limit of `(1 - z) chi(z)` as `z -> 1`, and an empirical boundedness
//! certificate.
//!
//! For a critical kernel with `gamma < n` both limits equal
//!
//! ```text
//! A = [sum_{k<n} x_k sum_{j=k+1}^{n} t_{-j}] / (n - gamma)
//! ```

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::coefficients::{horner, ToeplitzKernel, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::genfun::{denominator, numerator};
use crate::recurrence::{Prefix, SolutionTrace};

/// Shortest trace accepted by [`cesaro_slope`].
pub const MIN_SLOPE_TRACE: usize = 1000;

/// Default fraction of the trace, counted from the end, used for the fit.
pub const DEFAULT_SLOPE_WINDOW: f64 = 0.5;

/// Fits with a normalized residual above this are not linear.
pub const LINEAR_FIT_THRESHOLD: f64 = 1e-3;

/// Grid used to look for zeros of `tau(z) - z^n` inside `(0, 1)`.
const POLE_SCAN_POINTS: usize = 4096;

/// Largest relative growth of the window maximum still counted as stable.
pub const STABILITY_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeEstimate {
    pub slope: f64,
    /// Number of trace entries entering the largest partial sum.
    pub n_used: usize,
    /// Number of partial sums in the least-squares fit.
    pub fit_points: usize,
    /// RMS deviation from the fitted line over the range of the fitted sums.
    pub fit_residual: f64,
}

impl SlopeEstimate {
    pub fn is_linear(&self) -> bool {
        self.fit_residual <= LINEAR_FIT_THRESHOLD
    }
}

fn require_critical_subunit(kernel: &ToeplitzKernel) -> Result<()> {
    if kernel.compare_mass_to_one(DEFAULT_TOLERANCE)? != Ordering::Equal {
        return Err(Error::NotCritical);
    }
    if kernel.compare_moment_to_band(DEFAULT_TOLERANCE) != Ordering::Less {
        return Err(Error::MomentNotSubunit);
    }
    Ok(())
}

pub fn predicted_slope(kernel: &ToeplitzKernel, prefix: &Prefix) -> Result<f64> {
    require_critical_subunit(kernel)?;
    let n = kernel.band_depth();
    if prefix.len() != n {
        return Err(Error::PrefixLength { expected: n, got: prefix.len() });
    }
    let coeffs = kernel.coeffs_f64();
    let x = prefix.values().to_f64_vec();
    Ok(numerator(&coeffs, n, &x, 1.0) / (n as f64 - kernel.first_moment().to_f64()))
}

/// Partial sums `S_N = x_0 + ... + x_N`.
pub fn partial_sums(trace: &SolutionTrace) -> Vec<f64> {
    trace
        .to_f64_vec()
        .into_iter()
        .scan(0.0, |s, v| {
            *s += v;
            Some(*s)
        })
        .collect()
}

pub fn cesaro_slope(trace: &SolutionTrace) -> Result<SlopeEstimate> {
    cesaro_slope_with(trace, DEFAULT_SLOPE_WINDOW)
}

/// Least-squares slope of `S_N` against `N` over the last `window` fraction
/// of the trace.
pub fn cesaro_slope_with(trace: &SolutionTrace, window: f64) -> Result<SlopeEstimate> {
    let len = trace.len();
    if len < MIN_SLOPE_TRACE {
        return Err(Error::TraceTooShort { len, min: MIN_SLOPE_TRACE });
    }
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::InvalidParameter(format!("slope window {window} not in (0, 1]")));
    }
    let x = trace.to_f64_vec();
    if let Some(index) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteTrace { index });
    }
    let sums = partial_sums(trace);
    let start = len - ((len as f64 * window).round() as usize).clamp(2, len);
    let pts = &sums[start..];
    let m = pts.len() as f64;
    let n_mean = (start + len - 1) as f64 / 2.0;
    let s_mean = pts.iter().sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, s) in pts.iter().enumerate() {
        let dn = (start + i) as f64 - n_mean;
        sxy += dn * (s - s_mean);
        sxx += dn * dn;
    }
    let slope = sxy / sxx;
    let rss: f64 = pts
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let fit = s_mean + slope * ((start + i) as f64 - n_mean);
            (s - fit).powi(2)
        })
        .sum();
    let (lo, hi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    let range = hi - lo;
    let rms = (rss / m).sqrt();
    let fit_residual = if range > 0.0 { rms / range } else { rms };
    if !slope.is_finite() || !fit_residual.is_finite() {
        return Err(Error::NonFiniteTrace { index: len - 1 });
    }
    Ok(SlopeEstimate {
        slope,
        n_used: len,
        fit_points: pts.len(),
        fit_residual,
    })
}

/// First sign change or near-zero of `tau(z) - z^n` on a grid inside `(0, 1)`.
pub fn scan_for_pole(kernel: &ToeplitzKernel) -> Option<f64> {
    let coeffs = kernel.coeffs_f64();
    let n = kernel.band_depth() as i32;
    let d = |z: f64| horner(&coeffs, z) - z.powi(n);
    let mut prev = d(0.0);
    for i in 1..POLE_SCAN_POINTS {
        let z = i as f64 / POLE_SCAN_POINTS as f64;
        let cur = d(z);
        if denominator(kernel, &coeffs, z).is_err() || (cur < 0.0) != (prev < 0.0) {
            return Some(z);
        }
        prev = cur;
    }
    None
}

/// Limit of `(1 - z) chi(z)` as `z -> 1`.
///
/// Evaluates `eps chi(1 - eps)` for each `eps` and applies two-point
/// Richardson extrapolation to the two smallest, which removes the error
/// term linear in `eps`.
pub fn abel_limit(kernel: &ToeplitzKernel, prefix: &Prefix, epsilons: &[f64]) -> Result<f64> {
    if kernel.compare_mass_to_one(DEFAULT_TOLERANCE)? != Ordering::Equal {
        return Err(Error::NotCritical);
    }
    if let Some(z) = scan_for_pole(kernel) {
        return Err(Error::PoleDetected { z });
    }
    require_critical_subunit(kernel)?;
    let n = kernel.band_depth();
    if prefix.len() != n {
        return Err(Error::PrefixLength { expected: n, got: prefix.len() });
    }
    if epsilons.len() < 2
        || epsilons.iter().any(|e| !(*e > 0.0 && *e < 0.5))
        || epsilons.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::InvalidParameter(
            "epsilons must be at least two decreasing values in (0, 0.5)".into(),
        ));
    }
    let coeffs = kernel.coeffs_f64();
    let x = prefix.values().to_f64_vec();
    let f = |eps: f64| -> Result<f64> {
        let z = 1.0 - eps;
        Ok(eps * numerator(&coeffs, n, &x, z) / denominator(kernel, &coeffs, z)?)
    };
    let e1 = epsilons[epsilons.len() - 2];
    let e2 = epsilons[epsilons.len() - 1];
    let (f1, f2) = (f(e1)?, f(e2)?);
    Ok((e1 * f2 - e2 * f1) / (e1 - e2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessCertificate {
    /// Half the horizon of the trace.
    pub k: usize,
    /// `max |x_j|` over `[K/2, K]`.
    pub window_max: f64,
    /// `max |x_j|` over `[K, 2K]`.
    pub doubled_window_max: f64,
    /// `(doubled_window_max - window_max) / window_max`.
    pub relative_growth: f64,
    pub stable: bool,
}

/// Compares the trace maximum over `[K/2, K]` with that over `[K, 2K]`, where
/// the trace runs to `2K`. The trace is stable when it is finite and the
/// maximum grows by at most [`STABILITY_THRESHOLD`] relative to the first.
pub fn boundedness_certificate(trace: &SolutionTrace) -> Result<BoundednessCertificate> {
    let len = trace.len();
    if len < 5 {
        return Err(Error::TraceTooShort { len, min: 5 });
    }
    let x = trace.to_f64_vec();
    let k = (len - 1) / 2;
    let max_abs = |a: usize, b: usize| x[a..=b].iter().fold(0.0f64, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) });
    let window_max = max_abs(k / 2, k);
    let doubled_window_max = max_abs(k, 2 * k);
    let relative_growth = (doubled_window_max - window_max) / window_max;
    let stable = window_max.is_finite()
        && doubled_window_max.is_finite()
        && (relative_growth <= STABILITY_THRESHOLD || doubled_window_max <= window_max);
    Ok(BoundednessCertificate {
        k,
        window_max,
        doubled_window_max,
        relative_growth,
        stable,
    })
}
