//! Exact and float dynamic programs for the supremum distributions.

use std::cmp::Ordering;

use num_rational::BigRational;
use num_traits::{Num, One, Zero};
use serde::{Deserialize, Serialize};

use super::DiscreteDist;
use crate::coefficients::{horner, ToeplitzKernel};
use crate::error::{Error, Result};
use crate::number::{Number, Values};
use crate::recurrence::{solve_forward, Prefix};

/// Law of `nu - mu + n`, `probs[j] = d_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDist {
    pub probs: Values,
    pub band_depth: usize,
}

/// `x_k = P{sup_{r>=1} (N_r - r) < k}` for `k = 0..=K`.
///
/// Starts from `x_0 = 1 - E nu` and solves
/// `x_k = sum_{j=0}^{k} t_j x_{k-j+1}` for its last term.
pub fn takacs_dp(nu: &DiscreteDist, k_max: usize) -> Result<Values> {
    match (nu.probs(), nu.mean()) {
        (Values::Exact(t), Number::Exact(mean)) => {
            if *mean >= BigRational::one() {
                return Err(Error::MeanAtLeastOne);
            }
            if t[0].is_zero() {
                return Err(Error::ZeroT0);
            }
            Ok(Values::Exact(takacs_generic(t, BigRational::one() - mean, k_max)))
        }
        (Values::Float(t), Number::Float(mean)) => {
            if *mean >= 1.0 {
                return Err(Error::MeanAtLeastOne);
            }
            if t[0] == 0.0 {
                return Err(Error::ZeroT0);
            }
            Ok(Values::Float(takacs_generic(t, 1.0 - mean, k_max)))
        }
        _ => unreachable!("mean has the mode of the probabilities"),
    }
}

fn takacs_generic<T: Clone + Num>(t: &[T], x0: T, k_max: usize) -> Vec<T> {
    let mut x = Vec::with_capacity(k_max + 1);
    x.push(x0);
    for k in 0..k_max {
        let mut acc = x[k].clone();
        for j in 1..=k.min(t.len() - 1) {
            acc = acc - t[j].clone() * x[k - j + 1].clone();
        }
        x.push(acc / t[0].clone());
    }
    x
}

/// Closed form `(1 - E nu) nu(z) / (nu(z) - z)` of `sum_k x_k z^k`, where
/// `nu(z)` is the probability generating function.
pub fn takacs_generating_function(nu: &DiscreteDist, z: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&z) {
        return Err(Error::OutOfDomain { z });
    }
    let mean = nu.mean().to_f64();
    if mean >= 1.0 {
        return Err(Error::MeanAtLeastOne);
    }
    let g = horner(&nu.probs_f64(), z);
    let d = g - z;
    if d.abs() < crate::genfun::POLE_THRESHOLD * g.abs().max(1.0) {
        return Err(Error::PoleAtZ { z });
    }
    Ok((1.0 - mean) * g / d)
}

/// `d_j = sum_l P{mu = l} P{nu = j + l - n}`.
pub fn step_dist(nu: &DiscreteDist, mu: &DiscreteDist, n: usize) -> Result<StepDist> {
    if n == 0 {
        return Err(Error::InvalidBandDepth);
    }
    if mu.max_support() > n {
        return Err(Error::MuSupportExceedsN { n });
    }
    let len = nu.probs().len() + n;
    let probs = match (nu.probs(), mu.probs()) {
        (Values::Exact(p), Values::Exact(k)) => Values::Exact(convolve(p, k, n, len, BigRational::zero())),
        (Values::Float(p), Values::Float(k)) => Values::Float(convolve(p, k, n, len, 0.0)),
        _ => return Err(Error::ModeMismatch("nu and mu use different arithmetic".into())),
    };
    Ok(StepDist { probs, band_depth: n })
}

fn convolve<T: Clone + Num>(pi: &[T], kappa: &[T], n: usize, len: usize, zero: T) -> Vec<T> {
    let mut d = vec![zero; len];
    for (l, kl) in kappa.iter().enumerate().take(n + 1) {
        for (i, pv) in pi.iter().enumerate() {
            // nu = i, mu = l lands on j = i - l + n >= 0.
            let j = i + n - l;
            d[j] = d[j].clone() + kl.clone() * pv.clone();
        }
    }
    while d.len() > 1 && d.last().is_some_and(Zero::is_zero) {
        d.pop();
    }
    d
}

/// Kernel of band depth `n` with coefficients `d_j`.
pub fn step_kernel(step: &StepDist) -> Result<ToeplitzKernel> {
    ToeplitzKernel::new(step.band_depth, step.probs.clone(), 0.0)
}

/// Convergence target for the truncated boundary-value solve.
const TWO_SEQ_TOLERANCE: f64 = 1e-13;
/// Truncation points tried before giving up.
const TWO_SEQ_MAX_TRUNCATION: usize = 1 << 22;

/// `s_k = P{sup_{r>=1} (N_r - M_r) <= k}` for `k = -n..=K`; entry `i` of the
/// result is `s_{i-n}`.
///
/// Conditioning on the first step shows that `u_k = s_k` for `k >= 0` solves
/// `x = Tx` with kernel `d` and band depth `n`, and that
/// `s_k = sum_{j<=k+n} d_j u_{k+n-j}` for `-n <= k < 0`.
///
/// For `n = 1` the free value is known in closed form,
/// `s_0 = (E mu - E nu) / d_0`, and the forward engine does the rest in the
/// input's arithmetic. For `n >= 2` the `n` free values are not available in
/// closed form, so the bounded solution is found as the limit of boundary
/// value problems with `u_m = 1` past a truncation point, solved in floating
/// point.
pub fn two_seq_dp(nu: &DiscreteDist, mu: &DiscreteDist, n: usize, k_max: usize) -> Result<Values> {
    let drift = match (nu.mean(), mu.mean()) {
        (Number::Exact(a), Number::Exact(b)) => b.cmp(a),
        (a, b) => b.to_f64().partial_cmp(&a.to_f64()).unwrap_or(Ordering::Equal),
    };
    if drift != Ordering::Greater {
        return Err(Error::DriftNotNegative);
    }
    let step = step_dist(nu, mu, n)?;
    if !step.probs.get(0).is_some_and(|d0| d0.is_positive()) {
        return Err(Error::ZeroLeadingStep);
    }
    let u = if n == 1 {
        let kernel = step_kernel(&step)?;
        let s0 = match (&step.probs, nu.mean(), mu.mean()) {
            (Values::Exact(d), Number::Exact(a), Number::Exact(b)) => Values::Exact(vec![(b - a) / &d[0]]),
            (d, a, b) => Values::Float(vec![(b.to_f64() - a.to_f64()) / d.to_f64_vec()[0]]),
        };
        solve_forward(&kernel, &Prefix::new(s0)?, k_max.max(1))?.values().clone()
    } else {
        Values::Float(boundary_value_solution(&step.probs.to_f64_vec(), n, k_max + n)?)
    };
    Ok(prepend_negative(&step.probs, &u, n, k_max))
}

/// Prepends `s_{-n}, ..., s_{-1}` to `u_0, ..., u_K`.
fn prepend_negative(d: &Values, u: &Values, n: usize, k_max: usize) -> Values {
    fn build<T: Clone + Num>(d: &[T], u: &[T], n: usize, k_max: usize) -> Vec<T> {
        let mut out = Vec::with_capacity(k_max + n + 1);
        for m in 0..n {
            // s_{m-n} = sum_{j<=m} d_j u_{m-j}.
            let mut acc = T::zero();
            for j in 0..=m.min(d.len() - 1) {
                acc = acc + d[j].clone() * u[m - j].clone();
            }
            out.push(acc);
        }
        out.extend_from_slice(&u[..=k_max]);
        out
    }
    match (d, u) {
        (Values::Exact(d), Values::Exact(u)) => Values::Exact(build(d, u, n, k_max)),
        (d, u) => Values::Float(build(&d.to_f64_vec(), &u.to_f64_vec(), n, k_max)),
    }
}

/// Bounded solution of `u_k = sum_{j<=k+n} d_j u_{k+n-j}` with `u -> 1`,
/// returned for `k = 0..=upto`.
fn boundary_value_solution(d: &[f64], n: usize, upto: usize) -> Result<Vec<f64>> {
    let mut last = 64usize.max(4 * (upto + 1));
    let mut prev = solve_truncated(d, n, last);
    while last < TWO_SEQ_MAX_TRUNCATION {
        last *= 2;
        let next = solve_truncated(d, n, last);
        let change = (0..=upto).fold(0.0f64, |m, k| m.max((next[k] - prev[k]).abs()));
        prev = next;
        if change < TWO_SEQ_TOLERANCE {
            prev.truncate(upto + 1);
            return Ok(prev);
        }
    }
    Err(Error::NotConverged(format!(
        "two-sequence solution did not settle up to truncation {TWO_SEQ_MAX_TRUNCATION}"
    )))
}

/// Solves for `v = 1 - u` on rows `k = 0..=last` with `v_m = 0` past `last`:
///
/// ```text
/// v_k - sum_{j<=k+n} d_j v_{k+n-j} = sum_{j>k+n} d_j
/// ```
///
/// Working with the decaying complement keeps rounding relative to the
/// size of the unknowns. The matrix is banded and weakly diagonally
/// dominant, so elimination runs without pivoting.
fn solve_truncated(d: &[f64], n: usize, last: usize) -> Vec<f64> {
    let lower = d.len().saturating_sub(n + 1);
    let upper = n;
    let width = lower + upper + 1;
    let size = last + 1;
    // band[r][c - r + lower] holds entry (r, c).
    let mut band = vec![vec![0.0; width]; size];
    let mut rhs = vec![0.0; size];
    for k in 0..size {
        band[k][lower] += 1.0;
        for (j, dj) in d.iter().enumerate() {
            if j > k + n {
                rhs[k] += dj;
                continue;
            }
            let col = k + n - j;
            if col <= last {
                band[k][col + lower - k] -= dj;
            }
        }
    }
    for i in 0..size {
        let pivot = band[i][lower];
        for r in i + 1..size.min(i + lower + 1) {
            let factor = band[r][i + lower - r] / pivot;
            if factor == 0.0 {
                continue;
            }
            for c in i..size.min(i + upper + 1) {
                let v = band[i][c + lower - i];
                band[r][c + lower - r] -= factor * v;
            }
            rhs[r] -= factor * rhs[i];
        }
    }
    let mut v = vec![0.0; size];
    for i in (0..size).rev() {
        let mut acc = rhs[i];
        for c in i + 1..size.min(i + upper + 1) {
            acc -= band[i][c + lower - i] * v[c];
        }
        v[i] = acc / band[i][lower];
    }
    v.into_iter().map(|x| 1.0 - x).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::rational;

    fn q(v: &[(i64, i64)]) -> DiscreteDist {
        DiscreteDist::from_rationals(v.iter().map(|&(p, q)| rational(p, q)).collect()).unwrap()
    }

    #[test]
    fn takacs_examples() {
        let nu = q(&[(7, 10), (0, 1), (3, 10)]);
        let Values::Exact(x) = takacs_dp(&nu, 3).unwrap() else { panic!() };
        assert_eq!(x[0], rational(2, 5));
        assert_eq!(x[1], rational(4, 7));
        assert_eq!(x[2], rational(40, 49));
        assert_eq!(x[3], (rational(40, 49) - rational(3, 10) * rational(4, 7)) / rational(7, 10));

        let Values::Exact(x) = takacs_dp(&q(&[(1, 1)]), 5).unwrap() else { panic!() };
        assert!(x.iter().all(One::is_one));

        let Values::Exact(x) = takacs_dp(&q(&[(1, 2), (1, 2)]), 4).unwrap() else { panic!() };
        // Steps are -1 or 0, so the supremum never exceeds 0.
        assert_eq!(x[0], rational(1, 2));
        assert!(x[1..].iter().all(One::is_one));

        assert_eq!(takacs_dp(&q(&[(1, 2), (0, 1), (1, 2)]), 3), Err(Error::MeanAtLeastOne));
        assert_eq!(takacs_dp(&q(&[(0, 1), (1, 2), (1, 2)]), 3), Err(Error::MeanAtLeastOne));
        assert_eq!(takacs_dp(&q(&[(0, 1), (1, 1)]), 3), Err(Error::MeanAtLeastOne));
        let almost = DiscreteDist::from_f64(&[0.0, 0.9, 0.1]).unwrap();
        assert_eq!(takacs_dp(&almost, 3), Err(Error::MeanAtLeastOne));
    }

    #[test]
    fn takacs_zero_t0() {
        // Mean below one forces t_0 > 0, so the guard is reached only through
        // float round-off in the mean.
        let nu = DiscreteDist::from_f64(&[0.0, 1.0 - 1e-13, 1e-13]).unwrap();
        assert!(matches!(takacs_dp(&nu, 3), Err(Error::MeanAtLeastOne | Error::ZeroT0)));
    }

    #[test]
    fn takacs_series_matches_closed_form() {
        let nu = DiscreteDist::from_f64(&[0.7, 0.0, 0.3]).unwrap();
        let x = takacs_dp(&nu, 400).unwrap().to_f64_vec();
        for z in [0.1, 0.5, 0.9] {
            let series = x.iter().rev().fold(0.0, |acc, v| acc * z + v);
            let tail = z.powi(401) / (1.0 - z);
            let closed = takacs_generating_function(&nu, z).unwrap();
            assert!((series - closed).abs() <= tail + 1e-12);
        }
    }

    #[test]
    fn step_dist_examples() {
        let nu = q(&[(7, 10), (0, 1), (3, 10)]);
        let d = step_dist(&nu, &DiscreteDist::point_mass(1, true), 1).unwrap();
        assert_eq!(d.probs, nu.probs().clone());

        let d = step_dist(&DiscreteDist::point_mass(0, true), &DiscreteDist::point_mass(3, true), 3).unwrap();
        assert_eq!(d.probs, Values::Exact(vec![rational(1, 1)]));

        let half = q(&[(1, 2), (1, 2)]);
        let d = step_dist(&half, &half, 1).unwrap();
        assert_eq!(d.probs, Values::Exact(vec![rational(1, 4), rational(1, 2), rational(1, 4)]));

        assert_eq!(
            step_dist(&half, &DiscreteDist::point_mass(2, true), 1),
            Err(Error::MuSupportExceedsN { n: 1 })
        );
    }

    #[test]
    fn step_kernel_is_critical_with_subunit_moment() {
        let nu = q(&[(1, 2), (3, 10), (1, 5)]);
        let mu = q(&[(1, 10), (3, 10), (3, 5)]);
        let k = step_kernel(&step_dist(&nu, &mu, 2).unwrap()).unwrap();
        assert_eq!(k.mass(), Number::Exact(rational(1, 1)));
        // E nu - E mu + n = 0.7 - 1.5 + 2.
        assert_eq!(k.first_moment(), Number::Exact(rational(6, 5)));
    }

    #[test]
    fn reduction_to_single_sequence() {
        let nu = q(&[(7, 10), (0, 1), (3, 10)]);
        let x = takacs_dp(&nu, 12).unwrap();
        let s = two_seq_dp(&nu, &DiscreteDist::point_mass(1, true), 1, 11).unwrap();
        // s_{k} = x_{k+1}, and s_{-1} = x_0.
        assert_eq!(s, x);
    }

    #[test]
    fn degenerate_two_sequence() {
        let s = two_seq_dp(&DiscreteDist::point_mass(0, true), &DiscreteDist::point_mass(1, true), 1, 5).unwrap();
        assert_eq!(s, Values::Exact(vec![rational(1, 1); 7]));
        let s = two_seq_dp(&DiscreteDist::point_mass(0, false), &DiscreteDist::point_mass(2, false), 2, 5).unwrap();
        assert!(s.to_f64_vec().iter().all(|v| (v - 1.0).abs() < 1e-13));
    }

    #[test]
    fn two_sequence_errors() {
        let half = q(&[(1, 2), (1, 2)]);
        assert_eq!(two_seq_dp(&half, &half, 1, 5), Err(Error::DriftNotNegative));
        let nu = q(&[(0, 1), (1, 1)]);
        let mu = DiscreteDist::point_mass(2, true);
        assert_eq!(two_seq_dp(&nu, &mu, 2, 5), Err(Error::ZeroLeadingStep));
    }

    #[test]
    fn deeper_band_solution_solves_the_system() {
        let nu = DiscreteDist::from_f64(&[0.5, 0.3, 0.2]).unwrap();
        let mu = DiscreteDist::from_f64(&[0.1, 0.3, 0.6]).unwrap();
        let s = two_seq_dp(&nu, &mu, 2, 60).unwrap().to_f64_vec();
        let d = step_dist(&nu, &mu, 2).unwrap().probs.to_f64_vec();
        let u = &s[2..];
        for k in 0..50 {
            let rhs: f64 = (0..d.len().min(k + 3)).map(|j| d[j] * u[k + 2 - j]).sum();
            assert!((u[k] - rhs).abs() < 1e-12, "row {k}");
        }
        assert!(s.windows(2).all(|w| w[0] <= w[1] + 1e-15));
        assert!(s.iter().all(|v| (0.0..=1.0 + 1e-12).contains(v)));
        assert!(s[62] > 1.0 - 1e-6);
    }
}
