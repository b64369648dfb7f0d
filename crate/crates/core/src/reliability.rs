//! Closed-form availability and latency statistics.
//!
//! Everything in here is a pure function over immutable inputs: replica
//! failure probabilities, the product law for replicated deadline misses,
//! the first-response latency CDF and nearest-rank percentiles.

use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lists longer than this are multiplied in log space.
const LOG_SPACE_THRESHOLD: usize = 64;

/// Relative slack when comparing `p^N` against a replica-count target.
const POWER_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReliabilityError {
    #[error("invalid failure model: {0}")]
    InvalidModel(String),
    #[error("probability {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("probability list is empty")]
    EmptyList,
    #[error("no samples")]
    EmptySamples,
    #[error("invalid latency distribution: {0}")]
    InvalidDistribution(String),
}

pub type Result<T> = std::result::Result<T, ReliabilityError>;

/// Mean time between preemptions and the time it takes to bring a
/// replacement back, both in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureModel {
    pub mean_uptime_s: f64,
    pub recovery_time_s: f64,
}

impl FailureModel {
    pub fn new(mean_uptime_s: f64, recovery_time_s: f64) -> Result<Self> {
        let model = Self {
            mean_uptime_s,
            recovery_time_s,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_uptime_s > 0.0) || !self.mean_uptime_s.is_finite() {
            return Err(ReliabilityError::InvalidModel(format!(
                "mean_uptime must be positive, got {}",
                self.mean_uptime_s
            )));
        }
        if !(self.recovery_time_s >= 0.0) || !self.recovery_time_s.is_finite() {
            return Err(ReliabilityError::InvalidModel(format!(
                "recovery_time must be non-negative, got {}",
                self.recovery_time_s
            )));
        }
        Ok(())
    }
}

/// A probability in `[0, 1]`, used for per-VM failure and per-path
/// deadline-miss probabilities alike.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct MissProbability(f64);

impl MissProbability {
    pub const ZERO: Self = Self(0.0);
    pub const ONE: Self = Self(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(ReliabilityError::OutOfRange(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for MissProbability {
    type Error = ReliabilityError;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<MissProbability> for f64 {
    fn from(p: MissProbability) -> f64 {
        p.0
    }
}

/// Latency model for one network path or one server's compute time.
/// All values are milliseconds; `LogNormal` parameters are in log-ms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatencyDistribution {
    Constant {
        ms: f64,
    },
    #[serde(alias = "lognormal")]
    LogNormal {
        mu: f64,
        sigma: f64,
    },
    ShiftedExponential {
        offset_ms: f64,
        mean_ms: f64,
    },
    Empirical {
        samples_ms: Vec<f64>,
    },
}

impl LatencyDistribution {
    pub fn constant(ms: f64) -> Self {
        Self::Constant { ms }
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Self {
        Self::LogNormal { mu, sigma }
    }

    pub fn shifted_exponential(offset_ms: f64, mean_ms: f64) -> Self {
        Self::ShiftedExponential { offset_ms, mean_ms }
    }

    /// Builds an empirical distribution, keeping the samples sorted so the
    /// CDF is a binary search.
    pub fn empirical(mut samples_ms: Vec<f64>) -> Result<Self> {
        samples_ms.sort_by(f64::total_cmp);
        let dist = Self::Empirical { samples_ms };
        dist.validate()?;
        Ok(dist)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ReliabilityError::InvalidDistribution(msg));
        match self {
            Self::Constant { ms } if !(*ms >= 0.0) || !ms.is_finite() => bad(format!("constant latency must be finite and >= 0, got {ms}")),
            Self::LogNormal { mu, sigma } if !mu.is_finite() || !(*sigma >= 0.0) || !sigma.is_finite() => {
                bad(format!("lognormal needs finite mu and sigma >= 0, got mu={mu} sigma={sigma}"))
            }
            Self::ShiftedExponential { offset_ms, mean_ms }
                if !(*offset_ms >= 0.0) || !(*mean_ms >= 0.0) || !offset_ms.is_finite() || !mean_ms.is_finite() =>
            {
                bad(format!(
                    "shifted exponential needs offset >= 0 and mean >= 0, got offset={offset_ms} mean={mean_ms}"
                ))
            }
            Self::Empirical { samples_ms } if samples_ms.is_empty() => bad("empirical distribution needs at least one sample".into()),
            Self::Empirical { samples_ms } if samples_ms.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) => {
                bad("empirical samples must be finite and >= 0".into())
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Constant { ms } => *ms,
            Self::LogNormal { mu, sigma } => {
                if *sigma == 0.0 {
                    mu.exp()
                } else {
                    LogNormal::new(*mu, *sigma).expect("validated lognormal").sample(rng)
                }
            }
            Self::ShiftedExponential { offset_ms, mean_ms } => {
                if *mean_ms == 0.0 {
                    *offset_ms
                } else {
                    offset_ms + Exp::new(1.0 / mean_ms).expect("validated exponential").sample(rng)
                }
            }
            Self::Empirical { samples_ms } => samples_ms[rng.random_range(0..samples_ms.len())],
        }
    }

    /// `P(latency <= t_ms)`.
    pub fn cdf(&self, t_ms: f64) -> f64 {
        match self {
            Self::Constant { ms } => step(t_ms >= *ms),
            Self::LogNormal { mu, sigma } => {
                if t_ms <= 0.0 {
                    0.0
                } else if *sigma == 0.0 {
                    step(t_ms.ln() >= *mu)
                } else {
                    0.5 * libm::erfc(-(t_ms.ln() - mu) / (sigma * std::f64::consts::SQRT_2))
                }
            }
            Self::ShiftedExponential { offset_ms, mean_ms } => {
                if t_ms < *offset_ms {
                    0.0
                } else if *mean_ms == 0.0 {
                    1.0
                } else {
                    1.0 - (-(t_ms - offset_ms) / mean_ms).exp()
                }
            }
            Self::Empirical { samples_ms } => {
                // Sorted on construction, but serde input may not be.
                let below = if samples_ms.is_sorted_by(|a, b| a <= b) {
                    samples_ms.partition_point(|s| *s <= t_ms)
                } else {
                    samples_ms.iter().filter(|s| **s <= t_ms).count()
                };
                below as f64 / samples_ms.len() as f64
            }
        }
    }

    /// Probability of exceeding a deadline on this distribution alone.
    pub fn miss_probability(&self, deadline_ms: f64) -> MissProbability {
        MissProbability((1.0 - self.cdf(deadline_ms)).clamp(0.0, 1.0))
    }

    pub fn median(&self) -> f64 {
        match self {
            Self::Constant { ms } => *ms,
            Self::LogNormal { mu, .. } => mu.exp(),
            Self::ShiftedExponential { offset_ms, mean_ms } => offset_ms + mean_ms * std::f64::consts::LN_2,
            Self::Empirical { samples_ms } => {
                let mut sorted = samples_ms.clone();
                sorted.sort_by(f64::total_cmp);
                sorted[(sorted.len() - 1) / 2]
            }
        }
    }
}

fn step(cond: bool) -> f64 {
    if cond {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub count: usize,
    pub mean: f64,
    pub p50: f64,
    pub p99: f64,
    pub max: f64,
}

/// Fraction of time a replica is down: `recovery / (uptime + recovery)`.
pub fn vm_failure_probability(model: &FailureModel) -> Result<MissProbability> {
    model.validate()?;
    let p = model.recovery_time_s / (model.mean_uptime_s + model.recovery_time_s);
    MissProbability::new(p)
}

fn product(values: &[MissProbability]) -> f64 {
    if values.len() <= LOG_SPACE_THRESHOLD {
        return values.iter().map(|p| p.0).product();
    }
    if values.iter().any(|p| p.0 == 0.0) {
        return 0.0;
    }
    values.iter().map(|p| p.0.ln()).sum::<f64>().exp()
}

/// All replicas down at once. An empty fleet is always down.
pub fn system_failure_probability(per_vm: &[MissProbability]) -> MissProbability {
    MissProbability(product(per_vm).clamp(0.0, 1.0))
}

/// Smallest `N >= 1` with `p_vm^N <= p_target`.
pub fn required_replicas(p_vm: MissProbability, p_target: MissProbability) -> Result<u32> {
    let (p, target) = (p_vm.0, p_target.0);
    if p <= 0.0 || p >= 1.0 {
        return Err(ReliabilityError::InvalidInput(format!(
            "per-VM failure probability must be in (0, 1), got {p}"
        )));
    }
    if target <= 0.0 || target >= 1.0 {
        return Err(ReliabilityError::InvalidInput(format!(
            "target failure probability must be in (0, 1), got {target}"
        )));
    }
    // Decimal inputs such as 0.1^6 vs 1e-6 differ by an ulp or two.
    let meets = |n: u32| p.powi(n as i32) <= target * (1.0 + POWER_SLACK);
    let mut n = (target.ln() / p.ln()).ceil().max(1.0) as u32;
    while n > 1 && meets(n - 1) {
        n -= 1;
    }
    while !meets(n) {
        n += 1;
    }
    Ok(n)
}

/// Probability that every one of several independent paths misses the
/// deadline.
pub fn deadline_miss_probability(path_misses: &[MissProbability]) -> Result<MissProbability> {
    if path_misses.is_empty() {
        return Err(ReliabilityError::EmptyList);
    }
    Ok(MissProbability(product(path_misses).clamp(0.0, 1.0)))
}

/// CDF of the first response over independent paths:
/// `1 - prod(1 - F_i(t))`.
pub fn min_latency_cdf(paths: &[LatencyDistribution], t_ms: f64) -> Result<f64> {
    if paths.is_empty() {
        return Err(ReliabilityError::EmptyList);
    }
    if !(t_ms >= 0.0) {
        return Err(ReliabilityError::InvalidInput(format!("time must be >= 0, got {t_ms}")));
    }
    let survivors: Vec<MissProbability> = paths.iter().map(|d| MissProbability((1.0 - d.cdf(t_ms)).clamp(0.0, 1.0))).collect();
    Ok(1.0 - product(&survivors))
}

/// Nearest-rank percentile: the element at `ceil(q/100 * n) - 1` of the
/// sorted samples.
pub fn percentile(samples: &[f64], q: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(ReliabilityError::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    percentile_sorted(&sorted, q)
}

fn percentile_sorted(sorted: &[f64], q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 100.0) {
        return Err(ReliabilityError::InvalidInput(format!("percentile must be in (0, 100], got {q}")));
    }
    let n = sorted.len();
    let rank = (q / 100.0 * n as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, n) - 1])
}

pub fn summarize(samples: &[f64]) -> Result<LatencySummary> {
    if samples.is_empty() {
        return Err(ReliabilityError::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(LatencySummary {
        count: sorted.len(),
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        p50: percentile_sorted(&sorted, 50.0)?,
        p99: percentile_sorted(&sorted, 99.0)?,
        max: sorted[sorted.len() - 1],
    })
}
