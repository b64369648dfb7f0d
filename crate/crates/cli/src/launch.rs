//! Declarative deployment file for the demo: services, their fault
//! tolerance and replica catalog, plus scripted chaos.

use replicast_core::fleet::{FleetPolicy, ReplicaSpec};
use replicast_core::reliability::MissProbability;
use replicast_core::sim::{MatcherMode, TopologyConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaunchConfig {
    pub version: u32,
    pub deadline_ms: f64,
    /// Gap between consecutive robot requests.
    #[serde(default = "default_interval")]
    pub interval_ms: f64,
    #[serde(default)]
    pub topology: TopologyConfig,
    #[serde(default)]
    pub matcher_mode: MatcherMode,
    /// Robot-side network interfaces, all bound on loopback.
    #[serde(default = "default_interfaces")]
    pub interfaces: Vec<String>,
    /// Wall-clock milliseconds per modeled second of launch or recovery.
    #[serde(default = "default_time_scale")]
    pub time_scale_ms_per_s: f64,
    pub services: Vec<ServiceConfig>,
    #[serde(default)]
    pub chaos: ChaosConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FaultTolerance {
    Replicas(usize),
    TargetFailure(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub name: String,
    pub fault_tolerance: FaultTolerance,
    #[serde(default)]
    pub compute_ms: f64,
    #[serde(default)]
    pub regions: Vec<String>,
    pub catalog: Vec<ReplicaSpec>,
}

/// Request indices at which to inject faults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaosConfig {
    /// Kill this replica ordinal's process at `kill_replica_at`.
    #[serde(default)]
    pub replica: usize,
    pub kill_replica_at: Option<usize>,
    pub kill_directory_at: Option<usize>,
}

fn default_interval() -> f64 {
    20.0
}

fn default_interfaces() -> Vec<String> {
    vec!["wifi".into(), "lte".into()]
}

fn default_time_scale() -> f64 {
    0.5
}

fn invalid(field: impl Into<String>, reason: impl std::fmt::Display) -> CliError {
    CliError::user(format!("invalid config field `{}`: {reason}", field.into()))
}

impl LaunchConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::user(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.version != SCHEMA_VERSION {
            return Err(invalid(
                "version",
                format!("unsupported schema version {}, expected {SCHEMA_VERSION}", self.version),
            ));
        }
        if !(self.deadline_ms > 0.0) {
            return Err(invalid("deadline_ms", "must be positive"));
        }
        if !(self.interval_ms >= 0.0) {
            return Err(invalid("interval_ms", "must be non-negative"));
        }
        if !(self.time_scale_ms_per_s > 0.0) {
            return Err(invalid("time_scale_ms_per_s", "must be positive"));
        }
        if self.interfaces.is_empty() {
            return Err(invalid("interfaces", "need at least one interface"));
        }
        if self.services.is_empty() {
            return Err(invalid("services", "need at least one service"));
        }
        for (i, s) in self.services.iter().enumerate() {
            if s.name.is_empty() {
                return Err(invalid(format!("services[{i}].name"), "must not be empty"));
            }
            if s.catalog.is_empty() {
                return Err(invalid(format!("services[{i}].catalog"), "must not be empty"));
            }
            for (j, spec) in s.catalog.iter().enumerate() {
                spec.validate().map_err(|e| invalid(format!("services[{i}].catalog[{j}]"), e))?;
            }
            match s.fault_tolerance {
                FaultTolerance::Replicas(0) => {
                    return Err(invalid(format!("services[{i}].fault_tolerance.replicas"), "must be at least 1"))
                }
                FaultTolerance::TargetFailure(p) if !(p > 0.0 && p < 1.0) => {
                    return Err(invalid(
                        format!("services[{i}].fault_tolerance.target_failure"),
                        "must be in (0, 1)",
                    ))
                }
                _ => {}
            }
            if !(s.compute_ms >= 0.0) {
                return Err(invalid(format!("services[{i}].compute_ms"), "must be non-negative"));
            }
        }
        Ok(())
    }

    /// Fleet policy for a service, with the fleet clock in wall milliseconds.
    pub fn policy(&self, service: &ServiceConfig) -> Result<FleetPolicy, CliError> {
        let mut policy = FleetPolicy {
            regions: service.regions.clone(),
            time_scale: self.time_scale_ms_per_s,
            ..FleetPolicy::default()
        };
        match service.fault_tolerance {
            FaultTolerance::Replicas(n) => {
                policy.min_replicas = n;
                policy.default_replicas = n;
            }
            FaultTolerance::TargetFailure(p) => {
                policy.target_system_failure = Some(MissProbability::new(p).map_err(|e| invalid("fault_tolerance.target_failure", e))?);
            }
        }
        Ok(policy)
    }
}
