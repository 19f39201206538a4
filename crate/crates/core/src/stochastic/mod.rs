//! Random-walk oracles for `x = Tx`.
//!
//! With `N_r` a sum of `r` i.i.d. copies of a nonnegative integer variable
//! `nu` of mean below 1, `x_k = P{sup_{r>=1} (N_r - r) < k}` solves the
//! system with kernel `t_{j-1} = P{nu = j}`. With a second variable `mu`
//! supported on `{0, ..., n}` and `M_r` its partial sums,
//! `s_k = P{sup_{r>=1} (N_r - M_r) <= k}` solves it with band depth `n` and
//! kernel `d_j = P{nu - mu + n = j}`. Both are computed here by dynamic
//! programming and by Monte Carlo simulation.

mod dp;
mod simulate;

pub use dp::{step_dist, step_kernel, takacs_dp, takacs_generating_function, two_seq_dp, StepDist};
pub use simulate::{
    simulate_sup_single, simulate_sup_single_many, simulate_sup_two, simulate_sup_two_many, SimConfig,
    TwoSeqEstimate, WalkEstimate, CHUNK_SIZE, MIN_HORIZON, MIN_REPLICATIONS,
};

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::number::{Number, Values};

/// Float distributions must sum to 1 within this.
pub const DIST_SUM_TOLERANCE: f64 = 1e-12;

/// Law of a nonnegative integer variable, `probs[j] = P{X = j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDist {
    probs: Values,
    mean: Number,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistFile {
    pub probs: Vec<Number>,
}

impl DiscreteDist {
    pub fn new(probs: Values) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("no probabilities given".into()));
        }
        let mean = match &probs {
            Values::Exact(p) => {
                if let Some(j) = p.iter().position(Signed::is_negative) {
                    return Err(Error::InvalidDistribution(format!("probs[{j}] is negative")));
                }
                let total: BigRational = p.iter().sum();
                if !total.is_one() {
                    return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
                }
                Number::Exact(
                    p.iter()
                        .enumerate()
                        .map(|(j, v)| v * BigRational::from_integer(j.into()))
                        .sum(),
                )
            }
            Values::Float(p) => {
                if let Some(j) = p.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(Error::InvalidDistribution(format!("probs[{j}] is not a probability")));
                }
                let total: f64 = p.iter().sum();
                if (total - 1.0).abs() > DIST_SUM_TOLERANCE {
                    return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
                }
                Number::Float(p.iter().enumerate().map(|(j, v)| j as f64 * v).sum())
            }
        };
        Ok(DiscreteDist { probs, mean })
    }

    pub fn from_f64(probs: &[f64]) -> Result<Self> {
        Self::new(Values::Float(probs.to_vec()))
    }

    pub fn from_rationals(probs: Vec<BigRational>) -> Result<Self> {
        Self::new(Values::Exact(probs))
    }

    /// Point mass at `j`, in the requested mode.
    pub fn point_mass(j: usize, exact: bool) -> Self {
        let probs = if exact {
            let mut v = vec![BigRational::zero(); j + 1];
            v[j] = BigRational::one();
            Values::Exact(v)
        } else {
            let mut v = vec![0.0; j + 1];
            v[j] = 1.0;
            Values::Float(v)
        };
        Self::new(probs).expect("point mass is a distribution")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: DistFile = serde_json::from_str(text)?;
        Self::new(Values::from_numbers(file.probs)?)
    }

    pub fn probs(&self) -> &Values {
        &self.probs
    }

    pub fn probs_f64(&self) -> Vec<f64> {
        self.probs.to_f64_vec()
    }

    pub fn mean(&self) -> &Number {
        &self.mean
    }

    /// Largest `j` with `P{X = j} > 0`.
    pub fn max_support(&self) -> usize {
        self.probs
            .numbers()
            .iter()
            .rposition(Number::is_positive)
            .unwrap_or(0)
    }
}
