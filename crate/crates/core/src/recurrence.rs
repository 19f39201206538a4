//! Forward solution of `x = Tx` once the `n` free prefix values are fixed.
//!
//! Row `k` of the system reads `x_k = sum_{j=-n}^{k} t_j x_{k-j}`; solving it
//! for its last unknown gives
//!
//! ```text
//! x_{k+n} = (x_k - sum_{j=-n+1}^{k} t_j x_{k-j}) / t_{-n}
//! ```
//!
//! Float mode runs this directly. Exact mode clears denominators once: with
//! `L` the common denominator of the kernel and `a_i = L t_{i-n}`, every value
//! is kept as `y_m / (P a_0^{e(m)})` where `P` is the prefix denominator and
//! `e(m) = max(0, m - n + 1)`. The numerators then obey an integer recurrence
//! with small multipliers, so no gcd is ever taken while stepping.

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::io::{Read, Write};

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::coefficients::{KernelId, ToeplitzKernel, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::number::{ratio_to_f64, Number, ValueKind, Values};

/// Default cap on the bit length of exact numerators and denominators.
pub const DEFAULT_BIT_LIMIT: u64 = 65_536;

/// Below this leading coefficient float traces carry a stability warning.
pub const FLOAT_STABILITY_THRESHOLD: f64 = 0.1;

/// The `n` free initial values `x_0, ..., x_{n-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prefix {
    values: Values,
}

impl Prefix {
    pub fn new(values: Values) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("prefix is empty".into()));
        }
        if !values.numbers().iter().all(Number::is_positive) {
            return Err(Error::NonpositiveSeed);
        }
        Ok(Prefix { values })
    }

    pub fn from_f64(values: &[f64]) -> Result<Self> {
        Self::new(Values::Float(values.to_vec()))
    }

    pub fn exact(values: Vec<BigRational>) -> Result<Self> {
        Self::new(Values::Exact(values))
    }

    pub fn values(&self) -> &Values {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn kind(&self) -> ValueKind {
        self.values.kind()
    }

    pub fn to_kind(&self, kind: ValueKind) -> Result<Self> {
        Self::new(self.values.clone().into_kind(kind)?)
    }
}

/// Prefix `x_0 = ... = x_{n-1} = x0` in the kernel's arithmetic mode.
pub fn uniform_prefix(kernel: &ToeplitzKernel, x0: &Number) -> Result<Prefix> {
    if !x0.is_positive() {
        return Err(Error::NonpositiveSeed);
    }
    let seed = x0.clone().into_kind(kernel.value_kind())?;
    Prefix::new(Values::from_numbers(vec![seed; kernel.band_depth()])?)
}

/// Computed values `x_0, ..., x_K`.
///
/// Exact entries are stored as produced by the integer recurrence and are not
/// necessarily in lowest terms; [`SolutionTrace::value`] returns them reduced.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionTrace {
    values: Values,
    kernel_id: Option<KernelId>,
    warning: Option<String>,
}

impl SolutionTrace {
    pub fn new(values: Values, kernel_id: Option<KernelId>) -> Self {
        SolutionTrace {
            values,
            kernel_id,
            warning: None,
        }
    }

    pub fn values(&self) -> &Values {
        &self.values
    }

    pub fn mode(&self) -> ValueKind {
        self.values.kind()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, k: usize) -> Option<Number> {
        match &self.values {
            Values::Exact(v) => v.get(k).map(|r| Number::Exact(r.reduced())),
            Values::Float(v) => v.get(k).copied().map(Number::Float),
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.values.to_f64_vec()
    }

    pub fn kernel_id(&self) -> Option<&KernelId> {
        self.kernel_id.as_ref()
    }

    pub fn warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }

    /// Writes `k,x_k` (float) or `k,x_k_num,x_k_den` (exact, lowest terms).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        match &self.values {
            Values::Float(v) => {
                w.write_record(["k", "x_k"])?;
                for (k, x) in v.iter().enumerate() {
                    w.write_record([k.to_string(), format!("{x}")])?;
                }
            }
            Values::Exact(v) => {
                w.write_record(["k", "x_k_num", "x_k_den"])?;
                for (k, x) in v.iter().enumerate() {
                    let r = x.reduced();
                    w.write_record([k.to_string(), r.numer().to_string(), r.denom().to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, kernel_id: Option<KernelId>) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        let bad_row = |k: usize| Error::Parse(format!("trace row {k} is malformed"));
        let values = match header.iter().map(String::as_str).collect::<Vec<_>>()[..] {
            ["k", "x_k"] => {
                let mut v = Vec::new();
                for (k, rec) in r.records().enumerate() {
                    let rec = rec?;
                    check_index(&rec, k)?;
                    v.push(rec[1].trim().parse::<f64>().map_err(|_| bad_row(k))?);
                }
                Values::Float(v)
            }
            ["k", "x_k_num", "x_k_den"] => {
                let mut v = Vec::new();
                for (k, rec) in r.records().enumerate() {
                    let rec = rec?;
                    check_index(&rec, k)?;
                    let p: BigInt = rec[1].trim().parse().map_err(|_| bad_row(k))?;
                    let q: BigInt = rec[2].trim().parse().map_err(|_| bad_row(k))?;
                    if q.is_zero() {
                        return Err(bad_row(k));
                    }
                    v.push(BigRational::new(p, q));
                }
                Values::Exact(v)
            }
            _ => {
                return Err(Error::Parse(format!(
                    "unknown trace header {}",
                    header.join(",")
                )))
            }
        };
        Ok(SolutionTrace::new(values, kernel_id))
    }
}

fn check_index(rec: &csv::StringRecord, k: usize) -> Result<()> {
    match rec.get(0).map(|s| s.trim().parse::<usize>()) {
        Some(Ok(i)) if i == k => Ok(()),
        _ => Err(Error::Parse(format!("trace row {k} has a bad index"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverConfig {
    pub bit_limit: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            bit_limit: DEFAULT_BIT_LIMIT,
        }
    }
}

pub fn solve_forward(kernel: &ToeplitzKernel, prefix: &Prefix, k_max: usize) -> Result<SolutionTrace> {
    solve_forward_with(kernel, prefix, k_max, &SolverConfig::default())
}

pub fn solve_forward_with(
    kernel: &ToeplitzKernel,
    prefix: &Prefix,
    k_max: usize,
    config: &SolverConfig,
) -> Result<SolutionTrace> {
    let n = kernel.band_depth();
    check_inputs(kernel, prefix)?;
    if k_max < n {
        return Err(Error::HorizonTooShort { k: k_max, n });
    }
    match (kernel.coeffs(), prefix.values()) {
        (Values::Float(c), Values::Float(p)) => {
            let mut trace = SolutionTrace::new(Values::Float(float_forward(c, p, n, k_max)), Some(kernel.id()));
            if c[0] < FLOAT_STABILITY_THRESHOLD {
                trace.warning = Some(format!(
                    "t_-n = {} is below {FLOAT_STABILITY_THRESHOLD}; float recurrence may amplify rounding, prefer exact mode",
                    c[0]
                ));
            }
            Ok(trace)
        }
        (Values::Exact(_), Values::Exact(_)) => {
            let mut stepper = ExactStepper::with_bit_limit(kernel, prefix, config.bit_limit)?;
            let mut out = Vec::with_capacity(k_max + 1);
            for _ in 0..=k_max {
                stepper.step()?;
                out.push(stepper.current());
            }
            Ok(SolutionTrace::new(Values::Exact(out), Some(kernel.id())))
        }
        _ => unreachable!("modes checked above"),
    }
}

fn check_inputs(kernel: &ToeplitzKernel, prefix: &Prefix) -> Result<()> {
    if prefix.len() != kernel.band_depth() {
        return Err(Error::PrefixLength {
            expected: kernel.band_depth(),
            got: prefix.len(),
        });
    }
    if prefix.kind() != kernel.value_kind() {
        return Err(Error::ModeMismatch(format!(
            "{:?} prefix with {:?} kernel",
            prefix.kind(),
            kernel.value_kind()
        )));
    }
    Ok(())
}

fn float_forward(c: &[f64], prefix: &[f64], n: usize, k_max: usize) -> Vec<f64> {
    let mut x = Vec::with_capacity(k_max + 1);
    x.extend_from_slice(prefix);
    let top = c.len() - 1;
    for m in n..=k_max {
        let mut acc = x[m - n];
        for i in 1..=top.min(m) {
            acc -= c[i] * x[m - i];
        }
        x.push(acc / c[0]);
    }
    x
}

/// Streams exact values `x_0, x_1, ...` keeping only a sliding window, so
/// that very long horizons can be reached without storing the trace.
#[derive(Debug, Clone)]
pub struct ExactStepper {
    n: usize,
    common_den: BigInt,
    scaled: Vec<BigInt>,
    lead_pows: Vec<BigInt>,
    steady: Vec<BigInt>,
    steady_self: BigInt,
    prefix_den: BigInt,
    prefix_num: Vec<BigInt>,
    window: VecDeque<BigInt>,
    window_cap: usize,
    den: BigInt,
    produced: usize,
    bit_limit: u64,
}

impl ExactStepper {
    pub fn new(kernel: &ToeplitzKernel, prefix: &Prefix) -> Result<Self> {
        Self::with_bit_limit(kernel, prefix, DEFAULT_BIT_LIMIT)
    }

    pub fn with_bit_limit(kernel: &ToeplitzKernel, prefix: &Prefix, bit_limit: u64) -> Result<Self> {
        check_inputs(kernel, prefix)?;
        let (Values::Exact(c), Values::Exact(p)) = (kernel.coeffs(), prefix.values()) else {
            return Err(Error::ModeMismatch("exact stepping needs exact inputs".into()));
        };
        let n = kernel.band_depth();
        let common_den = c.iter().fold(BigInt::one(), |acc, r| acc.lcm(r.denom()));
        let scaled: Vec<BigInt> = c
            .iter()
            .map(|r| r.numer() * (&common_den / r.denom()))
            .collect();
        let top = scaled.len() - 1;
        let mut lead_pows = vec![BigInt::one()];
        for _ in 0..top.max(n) {
            let next = lead_pows.last().unwrap() * &scaled[0];
            lead_pows.push(next);
        }
        let steady: Vec<BigInt> = (0..=top)
            .map(|i| if i == 0 { BigInt::zero() } else { &scaled[i] * &lead_pows[i - 1] })
            .collect();
        let steady_self = &common_den * &lead_pows[n - 1];
        let prefix_den = p.iter().fold(BigInt::one(), |acc, r| acc.lcm(r.denom()));
        let prefix_num: Vec<BigInt> = p
            .iter()
            .map(|r| r.numer() * (&prefix_den / r.denom()))
            .collect();
        Ok(ExactStepper {
            n,
            common_den,
            scaled,
            lead_pows,
            steady,
            steady_self,
            den: prefix_den.clone(),
            prefix_den,
            prefix_num,
            window: VecDeque::with_capacity(top.max(n) + 1),
            window_cap: top.max(n),
            produced: 0,
            bit_limit,
        })
    }

    /// Number of values produced so far; the latest one has index `produced() - 1`.
    pub fn produced(&self) -> usize {
        self.produced
    }

    fn exponent(&self, m: usize) -> usize {
        (m + 1).saturating_sub(self.n)
    }

    fn numer_at(&self, j: usize) -> &BigInt {
        let first = self.produced - self.window.len();
        &self.window[j - first]
    }

    /// Computes the next value.
    pub fn step(&mut self) -> Result<()> {
        let m = self.produced;
        let y = if m < self.n {
            self.prefix_num[m].clone()
        } else {
            let em = self.exponent(m);
            let self_exp = em - 1 - self.exponent(m - self.n);
            let mut acc = if self_exp == self.n - 1 {
                &self.steady_self * self.numer_at(m - self.n)
            } else {
                &self.common_den * &self.lead_pows[self_exp] * self.numer_at(m - self.n)
            };
            let top = self.scaled.len() - 1;
            for i in 1..=top.min(m) {
                if self.scaled[i].is_zero() {
                    continue;
                }
                let exp = em - 1 - self.exponent(m - i);
                let term = if exp == i - 1 {
                    &self.steady[i] * self.numer_at(m - i)
                } else {
                    &self.scaled[i] * &self.lead_pows[exp] * self.numer_at(m - i)
                };
                acc -= term;
            }
            self.den *= &self.scaled[0];
            acc
        };
        let bits = y.bits().max(self.den.bits());
        if bits > self.bit_limit {
            return Err(Error::ArithmeticOverflow {
                index: m,
                bits,
                limit: self.bit_limit,
            });
        }
        if self.window.len() == self.window_cap {
            self.window.pop_front();
        }
        self.window.push_back(y);
        self.produced += 1;
        Ok(())
    }

    /// Advances until `x_k` is the latest value and returns it.
    pub fn advance_to(&mut self, k: usize) -> Result<BigRational> {
        if k + 1 < self.produced {
            return Err(Error::InvalidParameter(format!(
                "stepper already past index {k}"
            )));
        }
        while self.produced <= k {
            self.step()?;
        }
        Ok(self.current())
    }

    /// Latest value, not reduced to lowest terms.
    pub fn current(&self) -> BigRational {
        let y = self.window.back().expect("step() called at least once").clone();
        BigRational::new_raw(y, self.den.clone())
    }

    /// Sign of the latest value.
    pub fn current_sign(&self) -> Sign {
        self.window.back().map_or(Sign::NoSign, BigInt::sign)
    }

    /// Latest numerator and denominator (denominator positive, not reduced).
    pub fn current_parts(&self) -> (&BigInt, &BigInt) {
        (self.window.back().expect("step() called at least once"), &self.den)
    }

    pub fn prefix_denominator(&self) -> &BigInt {
        &self.prefix_den
    }
}

/// `x_k - sum_{j=-n}^{k} t_j x_{k-j}` for every row `k <= K - n`.
pub fn row_residuals(kernel: &ToeplitzKernel, trace: &SolutionTrace) -> Result<Values> {
    let n = kernel.band_depth();
    if trace.len() < n + 1 {
        return Err(Error::TraceTooShort { len: trace.len(), min: n + 1 });
    }
    let rows = trace.len() - n;
    match (kernel.coeffs(), trace.values()) {
        (Values::Exact(c), Values::Exact(x)) => Ok(Values::Exact(
            (0..rows)
                .map(|k| {
                    let rhs: BigRational = (0..c.len().min(k + n + 1))
                        .map(|i| &c[i] * &x[k + n - i])
                        .sum();
                    &x[k] - rhs
                })
                .collect(),
        )),
        (Values::Float(c), Values::Float(x)) => Ok(Values::Float(
            (0..rows)
                .map(|k| {
                    let rhs: f64 = (0..c.len().min(k + n + 1)).map(|i| c[i] * x[k + n - i]).sum();
                    x[k] - rhs
                })
                .collect(),
        )),
        _ => Err(Error::ModeMismatch("trace and kernel modes differ".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub all_positive: bool,
    pub first_nonpositive_index: Option<usize>,
    /// Smallest index from which the trace never decreases.
    pub monotone_nondecreasing_from: Option<usize>,
    /// Running-maximum chain `m_0 < m_1 < ...`: `m_0` is the largest prefix
    /// entry and `m_{i+1}` the first later index with `x >= x_{m_i}`.
    pub running_max_indices: Vec<usize>,
    pub max_chain_gap: Option<usize>,
    /// Whether every chain step whose row was computed advanced by at most
    /// `n`. `None` unless the trace is positive and the mass is at most 1.
    pub chain_gap_within_band: Option<bool>,
}

/// Sign pattern, monotone tail and running-maximum chain of a trace.
pub fn positivity_scan(trace: &SolutionTrace, kernel: &ToeplitzKernel) -> Result<PositivityReport> {
    let n = kernel.band_depth();
    let len = trace.len();
    if len < 2 * n {
        return Err(Error::TraceTooShort { len, min: 2 * n });
    }
    let cmp: Box<dyn Fn(usize, usize) -> Ordering> = match trace.values() {
        Values::Float(x) => {
            let x = x.clone();
            Box::new(move |a, b| x[a].partial_cmp(&x[b]).unwrap_or(Ordering::Equal))
        }
        Values::Exact(x) => {
            let x = x.clone();
            Box::new(move |a, b| cmp_ratio(&x[a], &x[b]))
        }
    };
    let first_nonpositive_index = match trace.values() {
        Values::Float(x) => x.iter().position(|v| !(*v > 0.0)),
        Values::Exact(x) => x.iter().position(|v| !v.is_positive()),
    };
    let all_positive = first_nonpositive_index.is_none();

    let mut start = len - 1;
    while start > 0 && cmp(start - 1, start) != Ordering::Greater {
        start -= 1;
    }
    let monotone_nondecreasing_from = (start < len - 1).then_some(start);

    let mut m0 = 0;
    for j in 1..n {
        if cmp(j, m0) == Ordering::Greater {
            m0 = j;
        }
    }
    let mut chain = vec![m0];
    let mut current = m0;
    for k in m0 + 1..len {
        if cmp(k, current) != Ordering::Less {
            chain.push(k);
            current = k;
        }
    }
    let max_chain_gap = chain.windows(2).map(|w| w[1] - w[0]).max();

    let mass_at_most_one = matches!(
        kernel.compare_mass_to_one(DEFAULT_TOLERANCE),
        Ok(Ordering::Less | Ordering::Equal)
    );
    let chain_gap_within_band = (all_positive && mass_at_most_one).then(|| {
        chain.iter().enumerate().all(|(i, &m)| {
            if m + n > len - 1 {
                return true;
            }
            chain.get(i + 1).is_some_and(|&next| next - m <= n)
        })
    });

    Ok(PositivityReport {
        all_positive,
        first_nonpositive_index,
        monotone_nondecreasing_from,
        running_max_indices: chain,
        max_chain_gap,
        chain_gap_within_band,
    })
}

/// Compares rationals with positive denominators by cross multiplication.
pub(crate) fn cmp_ratio(a: &BigRational, b: &BigRational) -> Ordering {
    if a.denom() == b.denom() {
        return a.numer().cmp(b.numer());
    }
    (a.numer() * b.denom()).cmp(&(b.numer() * a.denom()))
}

/// Multiplies `t_{-n}` of a critical kernel by `c > 1`, leaving the other
/// coefficients alone. The result has mass `1 + (c - 1) t_{-n}`.
pub fn scaled_kernel(critical_kernel: &ToeplitzKernel, c: &Number) -> Result<ToeplitzKernel> {
    if critical_kernel.compare_mass_to_one(DEFAULT_TOLERANCE)? != Ordering::Equal {
        return Err(Error::NotCritical);
    }
    if !(c.to_f64() > 1.0) {
        return Err(Error::ScaleNotAboveOne);
    }
    let coeffs = match (critical_kernel.coeffs(), c.clone().into_kind(critical_kernel.value_kind())?) {
        (Values::Exact(v), Number::Exact(c)) => {
            if c <= BigRational::one() {
                return Err(Error::ScaleNotAboveOne);
            }
            let mut v = v.clone();
            v[0] = &v[0] * c;
            Values::Exact(v)
        }
        (Values::Float(v), Number::Float(c)) => {
            let mut v = v.clone();
            v[0] *= c;
            Values::Float(v)
        }
        _ => unreachable!("scale converted to kernel mode"),
    };
    ToeplitzKernel::new(
        critical_kernel.band_depth(),
        coeffs,
        critical_kernel.tail_mass_bound(),
    )
}

/// Largest absolute entry over `k` in `[from, to]` as a double.
pub(crate) fn window_abs_max(trace: &SolutionTrace, from: usize, to: usize) -> f64 {
    match trace.values() {
        Values::Float(x) => x[from..=to].iter().fold(0.0, |m, v| m.max(v.abs())),
        Values::Exact(x) => x[from..=to]
            .iter()
            .fold(0.0, |m, v| m.max(ratio_to_f64(v).abs())),
    }
}
