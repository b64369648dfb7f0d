use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::fleet::ReplicaSpec;
use crate::matcher::Objective;
use crate::reliability::{FailureModel, LatencyDistribution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub duration_ms: f64,
    pub schedule: Schedule,
    pub interfaces: Vec<InterfaceConfig>,
    pub servers: Vec<ReplicaSpec>,
    pub paths: Vec<PathConfig>,
    pub deadline_ms: f64,
    #[serde(default)]
    pub matcher_mode: MatcherMode,
    #[serde(default)]
    pub objective: Objective,
    #[serde(default)]
    pub topology: TopologyConfig,
    #[serde(default = "default_payload")]
    pub payload_bytes: usize,
    /// Multiplies failure-model durations; scripted times are unaffected.
    #[serde(default = "unit_scale")]
    pub time_scale: f64,
    #[serde(default)]
    pub faults: Vec<FaultInjector>,
}

fn default_payload() -> usize {
    1024
}

fn unit_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Interval { interval_ms: f64 },
    Poisson { rate_per_s: f64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceConfig {
    pub name: String,
}

/// Round-trip network latency between one interface and one server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub interface: String,
    pub server: String,
    pub latency: LatencyDistribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatcherMode {
    /// Send on every configured path.
    #[default]
    AllPairs,
    /// Send on one path per interface, chosen by the matcher.
    Matched,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologyConfig {
    #[default]
    Direct,
    /// The robot sends one frame per interface to a gateway, which relays a
    /// copy to each server over a link of the given bandwidth.
    Gateway {
        #[serde(default)]
        bandwidth_bytes_per_s: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FaultInjector {
    /// Adds `added_ms` to every path into servers of `region` sent in the window.
    RegionSlowdown {
        region: String,
        added_ms: f64,
        #[serde(default)]
        start_ms: f64,
        #[serde(default)]
        end_ms: Option<f64>,
    },
    /// A competing client loads `server` for the first `burst_ms` of every
    /// `period_ms`. Work overlapping a burst takes `load_factor` extra
    /// compute samples.
    Oversubscription {
        server: String,
        load_factor: f64,
        period_ms: f64,
        #[serde(default)]
        burst_ms: Option<f64>,
        #[serde(default)]
        start_ms: f64,
        #[serde(default)]
        end_ms: Option<f64>,
    },
    /// Preempts `server` at the scripted times, or at exponential intervals
    /// drawn from the failure model when `at_ms` is empty.
    Preemption {
        server: String,
        #[serde(default)]
        failure_model: Option<FailureModel>,
        #[serde(default)]
        at_ms: Vec<f64>,
    },
    InterfaceOutage {
        interface: String,
        start_ms: f64,
        end_ms: f64,
    },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> SimError {
    SimError::InvalidConfig {
        field: field.into(),
        reason: reason.into(),
    }
}

fn check_window(field: &str, start: f64, end: Option<f64>, duration: f64) -> Result<(), SimError> {
    if !(start >= 0.0) || start > duration {
        return Err(invalid(format!("{field}.start_ms"), format!("must lie in [0, {duration}]")));
    }
    if let Some(end) = end {
        if !(end >= start) || end > duration {
            return Err(invalid(format!("{field}.end_ms"), format!("must lie in [start_ms, {duration}]")));
        }
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let cfg: Self = toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config is always representable")
    }

    pub fn interface_index(&self, name: &str) -> Option<usize> {
        self.interfaces.iter().position(|i| i.name == name)
    }

    pub fn server_index(&self, name: &str) -> Option<usize> {
        self.servers.iter().position(|s| s.name == name)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.duration_ms > 0.0) || !self.duration_ms.is_finite() {
            return Err(invalid("duration_ms", "must be positive and finite"));
        }
        if !(self.deadline_ms > 0.0) {
            return Err(invalid("deadline_ms", "must be positive"));
        }
        if !(self.time_scale > 0.0) {
            return Err(invalid("time_scale", "must be positive"));
        }
        match self.schedule {
            Schedule::Interval { interval_ms } if !(interval_ms > 0.0) => {
                return Err(invalid("schedule.interval_ms", "must be positive"));
            }
            Schedule::Poisson { rate_per_s } if !(rate_per_s > 0.0) => {
                return Err(invalid("schedule.rate_per_s", "must be positive"));
            }
            _ => {}
        }
        if let TopologyConfig::Gateway {
            bandwidth_bytes_per_s: Some(bw),
        } = self.topology
        {
            if !(bw > 0.0) {
                return Err(invalid("topology.bandwidth_bytes_per_s", "must be positive"));
            }
        }
        if self.interfaces.is_empty() {
            return Err(invalid("interfaces", "at least one interface is required"));
        }
        if self.servers.is_empty() {
            return Err(invalid("servers", "at least one server is required"));
        }
        let mut names = HashSet::new();
        for (i, iface) in self.interfaces.iter().enumerate() {
            if iface.name.is_empty() || !names.insert(iface.name.as_str()) {
                return Err(invalid(format!("interfaces[{i}].name"), "must be non-empty and unique"));
            }
        }
        let mut names = HashSet::new();
        for (j, server) in self.servers.iter().enumerate() {
            if server.name.is_empty() || !names.insert(server.name.as_str()) {
                return Err(invalid(format!("servers[{j}].name"), "must be non-empty and unique"));
            }
            server.validate().map_err(|e| invalid(format!("servers[{j}]"), e.to_string()))?;
        }
        if self.paths.is_empty() {
            return Err(invalid("paths", "at least one path is required"));
        }
        let mut pairs = HashSet::new();
        for (p, path) in self.paths.iter().enumerate() {
            if self.interface_index(&path.interface).is_none() {
                return Err(invalid(
                    format!("paths[{p}].interface"),
                    format!("unknown interface `{}`", path.interface),
                ));
            }
            if self.server_index(&path.server).is_none() {
                return Err(invalid(format!("paths[{p}].server"), format!("unknown server `{}`", path.server)));
            }
            if !pairs.insert((path.interface.as_str(), path.server.as_str())) {
                return Err(invalid(format!("paths[{p}]"), "duplicate (interface, server) pair"));
            }
            path.latency
                .validate()
                .map_err(|e| invalid(format!("paths[{p}].latency"), e.to_string()))?;
        }
        for (f, fault) in self.faults.iter().enumerate() {
            let field = format!("faults[{f}]");
            match fault {
                FaultInjector::RegionSlowdown {
                    region,
                    added_ms,
                    start_ms,
                    end_ms,
                } => {
                    if !self.servers.iter().any(|s| s.region == *region) {
                        return Err(invalid(format!("{field}.region"), format!("no server in region `{region}`")));
                    }
                    if !(*added_ms >= 0.0) {
                        return Err(invalid(format!("{field}.added_ms"), "must be >= 0"));
                    }
                    check_window(&field, *start_ms, *end_ms, self.duration_ms)?;
                }
                FaultInjector::Oversubscription {
                    server,
                    load_factor,
                    period_ms,
                    burst_ms,
                    start_ms,
                    end_ms,
                } => {
                    if self.server_index(server).is_none() {
                        return Err(invalid(format!("{field}.server"), format!("unknown server `{server}`")));
                    }
                    if !(*load_factor >= 0.0) {
                        return Err(invalid(format!("{field}.load_factor"), "must be >= 0"));
                    }
                    if !(*period_ms > 0.0) {
                        return Err(invalid(format!("{field}.period_ms"), "must be positive"));
                    }
                    if let Some(b) = burst_ms {
                        if !(*b >= 0.0 && *b <= *period_ms) {
                            return Err(invalid(format!("{field}.burst_ms"), "must lie in [0, period_ms]"));
                        }
                    }
                    check_window(&field, *start_ms, *end_ms, self.duration_ms)?;
                }
                FaultInjector::Preemption {
                    server,
                    failure_model,
                    at_ms,
                } => {
                    let Some(j) = self.server_index(server) else {
                        return Err(invalid(format!("{field}.server"), format!("unknown server `{server}`")));
                    };
                    let spec = &self.servers[j];
                    if spec.kind != crate::fleet::ReplicaKind::Spot {
                        return Err(invalid(format!("{field}.server"), "only spot replicas can be preempted"));
                    }
                    if let Some(m) = failure_model {
                        m.validate().map_err(|e| invalid(format!("{field}.failure_model"), e.to_string()))?;
                    }
                    for (k, t) in at_ms.iter().enumerate() {
                        if !(*t >= 0.0 && *t <= self.duration_ms) {
                            return Err(invalid(format!("{field}.at_ms[{k}]"), "must lie within the scenario duration"));
                        }
                    }
                }
                FaultInjector::InterfaceOutage {
                    interface,
                    start_ms,
                    end_ms,
                } => {
                    if self.interface_index(interface).is_none() {
                        return Err(invalid(format!("{field}.interface"), format!("unknown interface `{interface}`")));
                    }
                    check_window(&field, *start_ms, Some(*end_ms), self.duration_ms)?;
                }
            }
        }
        Ok(())
    }
}
