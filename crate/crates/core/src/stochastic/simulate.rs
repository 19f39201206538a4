//! Monte Carlo estimates of supremum probabilities.
//!
//! Replications run in fixed chunks of [`CHUNK_SIZE`]; chunk `c` draws from
//! a ChaCha8 stream seeded with the user seed and stream number `c`. Chunks
//! return integer histograms of the per-replication maximum, which are
//! summed, so results do not depend on the thread count or scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dp::step_dist;
use super::DiscreteDist;
use crate::error::{Error, Result};
use crate::number::Number;

pub const CHUNK_SIZE: u64 = 10_000;
pub const MIN_REPLICATIONS: u64 = 1_000;
pub const MIN_HORIZON: u64 = 100;
/// Conditional estimates need at least this many conditioning hits.
const MIN_CONDITIONING_HITS: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub horizon: u64,
    pub reps: u64,
    pub seed: u64,
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
}

impl SimConfig {
    pub fn new(horizon: u64, reps: u64, seed: u64) -> Self {
        SimConfig {
            horizon,
            reps,
            seed,
            threads: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.reps < MIN_REPLICATIONS {
            return Err(Error::InvalidParameter(format!(
                "need at least {MIN_REPLICATIONS} replications, got {}",
                self.reps
            )));
        }
        if self.horizon < MIN_HORIZON {
            return Err(Error::InvalidParameter(format!(
                "horizon must be at least {MIN_HORIZON}, got {}",
                self.horizon
            )));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidParameter("threads must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkEstimate {
    pub value: f64,
    /// Binomial standard error `sqrt(value (1 - value) / replications)`.
    pub std_error: f64,
    pub replications: u64,
    pub horizon: u64,
    pub seed: u64,
    /// Fraction of replications still within `n` of their running maximum
    /// during the last tenth of the horizon; large values mean the horizon
    /// may be cutting off later maxima.
    pub flagged_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSeqEstimate {
    pub k: i64,
    /// `P{sup <= k}`.
    pub unconditional: WalkEstimate,
    /// `P{sup <= k | sup >= 0}`.
    pub conditional: WalkEstimate,
}

/// Integer step sampler: `step = index - offset` with index drawn from a
/// cumulative table of 32-bit thresholds.
struct StepSampler {
    thresholds: Vec<u64>,
    /// Inner thresholds padded with `u64::MAX` when there are at most three.
    small: Option<[u64; 3]>,
    offset: i64,
}

impl StepSampler {
    fn new(probs: &[f64], offset: i64) -> Self {
        let total: f64 = probs.iter().sum();
        let mut acc = 0.0;
        let mut thresholds: Vec<u64> = probs
            .iter()
            .map(|p| {
                acc += p / total;
                (acc * 4_294_967_296.0).round().min(4_294_967_296.0) as u64
            })
            .collect();
        *thresholds.last_mut().expect("nonempty") = 1 << 32;
        let inner = &thresholds[..thresholds.len() - 1];
        let small = (inner.len() <= 3).then(|| {
            let mut t = [u64::MAX; 3];
            t[..inner.len()].copy_from_slice(inner);
            t
        });
        StepSampler {
            thresholds,
            small,
            offset,
        }
    }

    /// A step that is the same for every draw, if any.
    fn constant(&self) -> Option<i64> {
        let first = self.thresholds.iter().position(|&t| t > 0)?;
        (self.thresholds[first] == 1 << 32).then_some(first as i64 - self.offset)
    }

    /// Index = number of inner thresholds at or below the word.
    #[inline(always)]
    fn sample(&self, word: u32) -> i64 {
        let w = word as u64;
        if let Some(t) = &self.small {
            return (w >= t[0]) as i64 + (w >= t[1]) as i64 + (w >= t[2]) as i64 - self.offset;
        }
        let inner = &self.thresholds[..self.thresholds.len() - 1];
        inner.iter().map(|&t| (w >= t) as i64).sum::<i64>() - self.offset
    }
}

/// Histogram of per-replication maxima `max_{1<=r<=horizon} S_r`, which are
/// at least `-offset`.
#[derive(Debug, Clone, PartialEq)]
struct MaxHistogram {
    floor: i64,
    counts: Vec<u64>,
    flagged: u64,
    reps: u64,
}

impl MaxHistogram {
    fn empty(floor: i64, reps: u64) -> Self {
        MaxHistogram {
            floor,
            counts: Vec::new(),
            flagged: 0,
            reps,
        }
    }

    fn record(&mut self, max: i64) {
        let i = (max - self.floor) as usize;
        if i >= self.counts.len() {
            self.counts.resize(i + 1, 0);
        }
        self.counts[i] += 1;
    }

    fn merge(mut self, other: MaxHistogram) -> MaxHistogram {
        if other.counts.len() > self.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self.flagged += other.flagged;
        self.reps += other.reps;
        self
    }

    /// Number of replications with maximum at most `k`.
    fn at_most(&self, k: i64) -> u64 {
        if k < self.floor {
            return 0;
        }
        let upto = ((k - self.floor) as usize + 1).min(self.counts.len());
        self.counts[..upto].iter().sum()
    }
}

fn run_chunk(sampler: &StepSampler, band: i64, horizon: u64, reps: u64, seed: u64, chunk: u64) -> MaxHistogram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    let mut hist = MaxHistogram::empty(-sampler.offset, 0);
    let late = horizon - horizon / 10;
    if let Some(step) = sampler.constant() {
        // Deterministic walk: S_r = r * step.
        let max = if step >= 0 { step * horizon as i64 } else { step };
        let flagged = step >= 0;
        for _ in 0..reps {
            hist.record(max);
            hist.flagged += flagged as u64;
        }
        hist.reps = reps;
        return hist;
    }
    for _ in 0..reps {
        let mut s = 0i64;
        let mut max = i64::MIN;
        for _ in 0..late {
            s += sampler.sample(rng.next_u32());
            max = max.max(s);
        }
        let mut flagged = false;
        for _ in late..horizon {
            s += sampler.sample(rng.next_u32());
            max = max.max(s);
            flagged |= s >= max - band;
        }
        hist.record(max);
        hist.flagged += flagged as u64;
    }
    hist.reps = reps;
    hist
}

fn simulate_max(sampler: &StepSampler, band: i64, config: &SimConfig) -> Result<MaxHistogram> {
    config.validate()?;
    let chunks = config.reps.div_ceil(CHUNK_SIZE);
    let work = || {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let reps = CHUNK_SIZE.min(config.reps - c * CHUNK_SIZE);
                run_chunk(sampler, band, config.horizon, reps, config.seed, c)
            })
            .reduce(|| MaxHistogram::empty(-sampler.offset, 0), MaxHistogram::merge)
    };
    match config.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            Ok(pool.install(work))
        }
        None => Ok(work()),
    }
}

fn estimate(hits: u64, total: u64, hist: &MaxHistogram, config: &SimConfig) -> WalkEstimate {
    let value = hits as f64 / total as f64;
    WalkEstimate {
        value,
        std_error: (value * (1.0 - value) / total as f64).sqrt(),
        replications: total,
        horizon: config.horizon,
        seed: config.seed,
        flagged_fraction: hist.flagged as f64 / hist.reps as f64,
    }
}

fn require_mean_below_one(nu: &DiscreteDist) -> Result<()> {
    if nu.mean().to_f64() >= 1.0 || matches!(nu.mean(), Number::Exact(m) if *m >= num_traits::One::one()) {
        return Err(Error::MeanAtLeastOne);
    }
    Ok(())
}

/// Estimates `P{max_{1<=r<=horizon} (N_r - r) < k}`.
pub fn simulate_sup_single(nu: &DiscreteDist, k: i64, horizon: u64, reps: u64, seed: u64) -> Result<WalkEstimate> {
    let config = SimConfig::new(horizon, reps, seed);
    Ok(simulate_sup_single_many(nu, &[k], &config)?.remove(0))
}

/// One simulation serving every `k` in `ks`.
pub fn simulate_sup_single_many(nu: &DiscreteDist, ks: &[i64], config: &SimConfig) -> Result<Vec<WalkEstimate>> {
    require_mean_below_one(nu)?;
    let sampler = StepSampler::new(&nu.probs_f64(), 1);
    let hist = simulate_max(&sampler, 1, config)?;
    Ok(ks
        .iter()
        .map(|&k| estimate(hist.at_most(k - 1), hist.reps, &hist, config))
        .collect())
}

/// Estimates `P{sup <= k}` and `P{sup <= k | sup >= 0}` for the walk
/// `N_r - M_r`, with `mu` supported on `{0, ..., n}`.
pub fn simulate_sup_two(
    nu: &DiscreteDist,
    mu: &DiscreteDist,
    n: usize,
    k: i64,
    horizon: u64,
    reps: u64,
    seed: u64,
) -> Result<TwoSeqEstimate> {
    let config = SimConfig::new(horizon, reps, seed);
    Ok(simulate_sup_two_many(nu, mu, n, &[k], &config)?.remove(0))
}

pub fn simulate_sup_two_many(
    nu: &DiscreteDist,
    mu: &DiscreteDist,
    n: usize,
    ks: &[i64],
    config: &SimConfig,
) -> Result<Vec<TwoSeqEstimate>> {
    if mu.mean().to_f64() <= nu.mean().to_f64() {
        return Err(Error::DriftNotNegative);
    }
    let d = step_dist(nu, mu, n)?;
    let sampler = StepSampler::new(&d.probs.to_f64_vec(), n as i64);
    let hist = simulate_max(&sampler, n as i64, config)?;
    let reps = hist.reps;
    let below_zero = hist.at_most(-1);
    let cond_hits = reps - below_zero;
    if cond_hits < MIN_CONDITIONING_HITS {
        return Err(Error::ConditioningEventTooRare { hits: cond_hits, reps });
    }
    Ok(ks
        .iter()
        .map(|&k| {
            let at_most = hist.at_most(k);
            TwoSeqEstimate {
                k,
                unconditional: estimate(at_most, reps, &hist, config),
                conditional: estimate(at_most.saturating_sub(below_zero), cond_hits, &hist, config),
            }
        })
        .collect())
}
