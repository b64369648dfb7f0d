//! Seeded discrete-event simulator.
//!
//! A scenario describes robot interfaces, servers, per-path latency
//! distributions and injected faults. [`run`] replays it deterministically
//! and yields one [`TraceRecord`] per request; [`compare`] replays the same
//! scenario restricted to different server subsets. Every random draw for a
//! (request, path) pair comes from a generator keyed by the seed, the
//! request index and the path index, so variants see identical randomness.

mod config;
mod engine;
mod report;
mod trace;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{FaultInjector, InterfaceConfig, MatcherMode, PathConfig, ScenarioConfig, Schedule, TopologyConfig};
pub use engine::{run, run_variant, EventLogEntry, SimEvent, SimOutput};
pub use report::{cdf_points, histogram, CdfPoint, HistogramBucket};
pub use trace::{read_trace_csv, write_events_jsonl, write_trace_csv, PathOutcome, PathStatus, TraceRecord, TraceRow};

use crate::reliability::{summarize, LatencySummary};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },
    #[error("unknown variant `{0}`")]
    UnknownVariant(String),
    #[error("matcher failed: {0}")]
    Matcher(String),
    #[error("trace error: {0}")]
    Trace(String),
}

/// Which servers a run may use.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Every configured path.
    Replicated,
    /// Paths into one server, optionally through one interface only.
    Single { server: String, interface: Option<String> },
}

impl FromStr for Variant {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        let s = s.trim();
        if s == "replicated" {
            return Ok(Self::Replicated);
        }
        let Some(rest) = s.strip_prefix("single:") else {
            return Err(SimError::UnknownVariant(s.to_string()));
        };
        let (server, interface) = match rest.split_once('@') {
            Some((srv, iface)) => (srv, Some(iface.to_string())),
            None => (rest, None),
        };
        if server.is_empty() || interface.as_deref() == Some("") {
            return Err(SimError::UnknownVariant(s.to_string()));
        }
        Ok(Self::Single {
            server: server.to_string(),
            interface,
        })
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Replicated => f.write_str("replicated"),
            Self::Single { server, interface: None } => write!(f, "single:{server}"),
            Self::Single {
                server,
                interface: Some(i),
            } => write!(f, "single:{server}@{i}"),
        }
    }
}

impl Variant {
    /// Parses a comma-separated list.
    pub fn parse_list(list: &str) -> Result<Vec<Self>, SimError> {
        list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
    }

    /// Path indices this variant may use.
    pub fn paths(&self, cfg: &ScenarioConfig) -> Result<Vec<usize>, SimError> {
        match self {
            Self::Replicated => Ok((0..cfg.paths.len()).collect()),
            Self::Single { server, interface } => {
                if cfg.server_index(server).is_none() {
                    return Err(SimError::UnknownVariant(self.to_string()));
                }
                if let Some(i) = interface {
                    if cfg.interface_index(i).is_none() {
                        return Err(SimError::UnknownVariant(self.to_string()));
                    }
                }
                let ids: Vec<usize> = (0..cfg.paths.len())
                    .filter(|&p| cfg.paths[p].server == *server && interface.as_ref().is_none_or(|i| cfg.paths[p].interface == *i))
                    .collect();
                if ids.is_empty() {
                    return Err(SimError::UnknownVariant(self.to_string()));
                }
                Ok(ids)
            }
        }
    }
}

const DOMAIN_PATH: u64 = 1;
const DOMAIN_ARRIVALS: u64 = 2;
const DOMAIN_PREEMPT: u64 = 3;
const DOMAIN_COSTS: u64 = 4;

/// Independent generator for `(seed, domain, a, b)`. ChaCha is a PRF of
/// its key, so distinct keys give independent streams.
pub(crate) fn stream(seed: u64, domain: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, word) in key.chunks_exact_mut(8).zip([seed, domain, a, b]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub requests: usize,
    pub timeouts: usize,
    pub timeout_fraction: f64,
    /// Over requests that got a response before the deadline.
    pub latency: Option<LatencySummary>,
    pub egress_bytes: u64,
}

impl RunSummary {
    pub fn from_trace(trace: &[TraceRecord]) -> Self {
        let latencies: Vec<f64> = trace.iter().filter_map(|r| r.latency_ms).collect();
        let timeouts = trace.len() - latencies.len();
        Self {
            requests: trace.len(),
            timeouts,
            timeout_fraction: if trace.is_empty() {
                0.0
            } else {
                timeouts as f64 / trace.len() as f64
            },
            latency: summarize(&latencies).ok(),
            egress_bytes: trace.iter().map(|r| r.egress_bytes).sum(),
        }
    }
}

/// `baseline / this` for mean and P99; above 1 means this variant is faster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub baseline: String,
    pub mean_factor: f64,
    pub p99_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub variant: String,
    pub summary: RunSummary,
    /// Against every single-server variant other than this one.
    pub improvements: Vec<Improvement>,
}

/// Runs each variant on the same seed and fault schedule.
pub fn compare(cfg: &ScenarioConfig, variants: &[Variant]) -> Result<Vec<VariantReport>, SimError> {
    if variants.is_empty() {
        return Err(SimError::UnknownVariant(String::new()));
    }
    let mut reports = Vec::with_capacity(variants.len());
    for v in variants {
        let out = run_variant(cfg, v)?;
        reports.push((v.clone(), RunSummary::from_trace(&out.trace)));
    }
    Ok(reports
        .iter()
        .map(|(v, summary)| {
            let improvements = reports
                .iter()
                .filter(|(other, _)| other != v && matches!(other, Variant::Single { .. }))
                .filter_map(|(other, base)| {
                    let (b, s) = (base.latency.as_ref()?, summary.latency.as_ref()?);
                    Some(Improvement {
                        baseline: other.to_string(),
                        mean_factor: b.mean / s.mean,
                        p99_factor: b.p99 / s.p99,
                    })
                })
                .collect();
            VariantReport {
                variant: v.to_string(),
                summary: summary.clone(),
                improvements,
            }
        })
        .collect())
}

/// Aligned text table of a comparison.
pub fn format_table(reports: &[VariantReport]) -> String {
    let mut out = format!(
        "{:<24} {:>9} {:>10} {:>10} {:>10} {:>10}  {}\n",
        "variant", "requests", "mean_ms", "p50_ms", "p99_ms", "timeout_%", "improvement (mean/p99)"
    );
    for r in reports {
        let (mean, p50, p99) = r.summary.latency.as_ref().map_or(("-".into(), "-".into(), "-".into()), |l| {
            (format!("{:.3}", l.mean), format!("{:.3}", l.p50), format!("{:.3}", l.p99))
        });
        let imp: Vec<String> = r
            .improvements
            .iter()
            .map(|i| format!("vs {}: {:.2}x/{:.2}x", i.baseline, i.mean_factor, i.p99_factor))
            .collect();
        out.push_str(&format!(
            "{:<24} {:>9} {:>10} {:>10} {:>10} {:>10.3}  {}\n",
            r.variant,
            r.summary.requests,
            mean,
            p50,
            p99,
            100.0 * r.summary.timeout_fraction,
            imp.join(", ")
        ));
    }
    out
}
