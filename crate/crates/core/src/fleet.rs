//! Replica pool management.
//!
//! A [`Fleet`] owns the lifecycle of every replica: it plans the initial
//! pool from a catalog, moves records through the legal state machine as
//! events and time arrive, relaunches preempted spot replicas under their
//! original [`PeerGuid`], and scales up or down on request. It never touches
//! a cloud API itself; a [`Provisioner`] carries out the actions it emits.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discovery::PeerGuid;
use crate::reliability::{required_replicas, vm_failure_probability, FailureModel, LatencyDistribution, MissProbability};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FleetError {
    #[error("catalog is empty")]
    EmptyCatalog,
    #[error("need {needed} distinct regions but the catalog offers {available}")]
    InsufficientCatalog { needed: usize, available: usize },
    #[error("scaling down by {requested} would leave {remaining} replicas, below the minimum of {minimum}")]
    BelowMinimum {
        requested: usize,
        remaining: usize,
        minimum: usize,
    },
    #[error("illegal transition {from:?} -> {to:?} for {kind:?} replica")]
    IllegalTransition {
        from: ReplicaState,
        to: ReplicaState,
        kind: ReplicaKind,
    },
    #[error("invalid replica spec: {0}")]
    InvalidSpec(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("unknown replica {0:?}")]
    UnknownReplica(PeerGuid),
    #[error("provisioner failed: {0}")]
    Provisioner(String),
}

pub type Result<T> = std::result::Result<T, FleetError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplicaKind {
    Spot,
    #[serde(alias = "on-demand")]
    OnDemand,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Hardware {
    #[serde(default)]
    pub cpus: u32,
    #[serde(default)]
    pub memory_gb: f64,
    #[serde(default)]
    pub accelerator: Option<String>,
}

/// A launchable machine type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaSpec {
    #[serde(default)]
    pub name: String,
    pub kind: ReplicaKind,
    pub region: String,
    #[serde(default)]
    pub hardware: Hardware,
    #[serde(default)]
    pub price_per_hour: f64,
    #[serde(default)]
    pub failure_model: Option<FailureModel>,
    #[serde(default = "zero_compute")]
    pub compute_model: LatencyDistribution,
}

fn zero_compute() -> LatencyDistribution {
    LatencyDistribution::constant(0.0)
}

impl ReplicaSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kind == ReplicaKind::Spot && self.failure_model.is_none() {
            return Err(FleetError::InvalidSpec(format!(
                "spot replica `{}` needs a failure_model",
                self.name
            )));
        }
        if let Some(model) = &self.failure_model {
            model.validate().map_err(|e| FleetError::InvalidSpec(e.to_string()))?;
        }
        if !(self.price_per_hour >= 0.0) {
            return Err(FleetError::InvalidSpec(format!("price_per_hour must be >= 0 for `{}`", self.name)));
        }
        self.compute_model.validate().map_err(|e| FleetError::InvalidSpec(e.to_string()))
    }

    /// Probability this replica is down at a random instant. On-demand
    /// replicas never preempt.
    pub fn failure_probability(&self) -> MissProbability {
        match (self.kind, &self.failure_model) {
            (ReplicaKind::Spot, Some(model)) => vm_failure_probability(model).unwrap_or(MissProbability::ONE),
            _ => MissProbability::ZERO,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplicaState {
    Provisioning,
    Initializing,
    Active,
    Preempted,
    Relaunching,
    Retired,
}

impl ReplicaState {
    pub const ALL: [ReplicaState; 6] = [
        Self::Provisioning,
        Self::Initializing,
        Self::Active,
        Self::Preempted,
        Self::Relaunching,
        Self::Retired,
    ];
}

/// The lifecycle graph. Retirement is allowed from every live state.
pub fn is_legal_transition(from: ReplicaState, to: ReplicaState, kind: ReplicaKind) -> bool {
    use ReplicaState::*;
    match (from, to) {
        (Retired, _) => false,
        (_, Retired) => true,
        (Provisioning, Initializing) | (Initializing, Active) => true,
        (Active, Preempted) => kind == ReplicaKind::Spot,
        (Preempted, Relaunching) | (Relaunching, Initializing) => true,
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRecord {
    pub spec: ReplicaSpec,
    pub peer: PeerGuid,
    pub state: ReplicaState,
    pub endpoint: Option<String>,
    pub state_since: f64,
    /// Scaled down; finishing in-flight requests before retirement.
    pub draining: bool,
    ready_at: Option<f64>,
}

impl ReplicaRecord {
    fn transition(&mut self, to: ReplicaState, now: f64) -> Result<()> {
        if !is_legal_transition(self.state, to, self.spec.kind) {
            return Err(FleetError::IllegalTransition {
                from: self.state,
                to,
                kind: self.spec.kind,
            });
        }
        self.state = to;
        self.state_since = now;
        Ok(())
    }

    pub fn is_live(&self) -> bool {
        self.state != ReplicaState::Retired
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetPolicy {
    #[serde(default = "default_replicas")]
    pub min_replicas: usize,
    #[serde(default)]
    pub target_system_failure: Option<MissProbability>,
    /// Allowed regions in preference order; empty means any.
    #[serde(default)]
    pub regions: Vec<String>,
    #[serde(default = "default_replicas")]
    pub default_replicas: usize,
    /// Refuse plans that cannot put every replica in its own region.
    #[serde(default)]
    pub strict_regions: bool,
    /// Seconds to bring up an on-demand replica.
    #[serde(default = "default_launch_time")]
    pub launch_time_s: f64,
    /// Multiplies every duration; below 1 compresses hours into seconds.
    #[serde(default = "unit_scale")]
    pub time_scale: f64,
}

fn default_replicas() -> usize {
    2
}

fn default_launch_time() -> f64 {
    20.0 * 60.0
}

fn unit_scale() -> f64 {
    1.0
}

impl Default for FleetPolicy {
    fn default() -> Self {
        Self {
            min_replicas: default_replicas(),
            target_system_failure: None,
            regions: Vec::new(),
            default_replicas: default_replicas(),
            strict_regions: false,
            launch_time_s: default_launch_time(),
            time_scale: 1.0,
        }
    }
}

impl FleetPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.min_replicas < 1 {
            return Err(FleetError::InvalidPolicy("min_replicas must be at least 1".into()));
        }
        if !(self.time_scale > 0.0) || !(self.launch_time_s >= 0.0) {
            return Err(FleetError::InvalidPolicy("time_scale must be > 0 and launch_time_s >= 0".into()));
        }
        Ok(())
    }
}

/// Picks the replicas to run: `max(min_replicas, N)` where `N` comes from
/// the failure target, spread over distinct regions before any region is
/// reused, cheapest spec first within a region.
pub fn plan(policy: &FleetPolicy, catalog: &[ReplicaSpec]) -> Result<Vec<ReplicaSpec>> {
    policy.validate()?;
    if catalog.is_empty() {
        return Err(FleetError::EmptyCatalog);
    }
    for spec in catalog {
        spec.validate()?;
    }
    let allowed: Vec<&ReplicaSpec> = catalog
        .iter()
        .filter(|s| policy.regions.is_empty() || policy.regions.contains(&s.region))
        .collect();
    if allowed.is_empty() {
        return Err(FleetError::InsufficientCatalog { needed: 1, available: 0 });
    }

    let mut count = policy.min_replicas;
    if let Some(target) = policy.target_system_failure {
        // Size against the least reliable spot spec on offer.
        let worst = allowed
            .iter()
            .map(|s| s.failure_probability())
            .filter(|p| p.value() > 0.0)
            .fold(None, |acc: Option<MissProbability>, p| {
                Some(acc.map_or(p, |a| if p > a { p } else { a }))
            });
        if let Some(p_vm) = worst {
            let needed = required_replicas(p_vm, target).map_err(|e| FleetError::InvalidPolicy(e.to_string()))?;
            count = count.max(needed as usize);
        }
    }

    // Cheapest spec per region; regions ordered by policy preference, then by
    // cheapest price, then by first appearance in the catalog.
    let mut per_region: Vec<(String, &ReplicaSpec, usize)> = Vec::new();
    for (idx, spec) in allowed.iter().enumerate() {
        match per_region.iter_mut().find(|(r, _, _)| *r == spec.region) {
            Some(slot) if spec.price_per_hour < slot.1.price_per_hour => slot.1 = spec,
            Some(_) => {}
            None => per_region.push((spec.region.clone(), spec, idx)),
        }
    }
    let preference = |region: &str| policy.regions.iter().position(|r| r == region).unwrap_or(usize::MAX);
    per_region.sort_by(|a, b| {
        preference(&a.0)
            .cmp(&preference(&b.0))
            .then(a.1.price_per_hour.total_cmp(&b.1.price_per_hour))
            .then(a.2.cmp(&b.2))
    });
    if policy.strict_regions && count > per_region.len() {
        return Err(FleetError::InsufficientCatalog {
            needed: count,
            available: per_region.len(),
        });
    }
    Ok((0..count).map(|i| per_region[i % per_region.len()].1.clone()).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum FleetEvent {
    /// The provider shut a spot replica down.
    Preempted { peer: PeerGuid },
    /// A draining replica has no requests left in flight.
    Drained { peer: PeerGuid },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum FleetAction {
    Launch {
        peer: PeerGuid,
        spec: String,
        region: String,
    },
    Relaunch {
        peer: PeerGuid,
        region: String,
    },
    /// The replica is serving; (re)advertise it under its guid.
    Advertise {
        peer: PeerGuid,
    },
    Drain {
        peer: PeerGuid,
    },
    Retire {
        peer: PeerGuid,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleDirection {
    Up,
    Down,
}

impl std::str::FromStr for ScaleDirection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "up" => Ok(Self::Up),
            "down" => Ok(Self::Down),
            other => Err(format!("scale direction must be up or down, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fleet {
    policy: FleetPolicy,
    catalog: Vec<ReplicaSpec>,
    records: Vec<ReplicaRecord>,
    label: String,
    next_ordinal: usize,
}

impl Fleet {
    /// Plans the pool and emits a launch for each replica. Records start in
    /// `Provisioning` and become active once their launch time has passed.
    pub fn launch(label: &str, policy: FleetPolicy, catalog: Vec<ReplicaSpec>, now: f64) -> Result<(Self, Vec<FleetAction>)> {
        let specs = plan(&policy, &catalog)?;
        let mut fleet = Self {
            policy,
            catalog,
            records: Vec::new(),
            label: label.to_string(),
            next_ordinal: 0,
        };
        let actions = specs.into_iter().map(|s| fleet.provision(s, now)).collect();
        Ok((fleet, actions))
    }

    /// Like [`launch`](Self::launch) but with every replica already serving.
    pub fn running(label: &str, policy: FleetPolicy, catalog: Vec<ReplicaSpec>, now: f64) -> Result<Self> {
        let (fleet, _) = Self::launch(label, policy, catalog, now)?;
        fleet.activate_all(now)
    }

    /// Takes over exactly `specs`, all serving, without planning. Record `i`
    /// gets ordinal `i`.
    pub fn adopt(label: &str, policy: FleetPolicy, specs: Vec<ReplicaSpec>, now: f64) -> Result<Self> {
        policy.validate()?;
        for spec in &specs {
            spec.validate()?;
        }
        let mut fleet = Self {
            policy,
            catalog: specs.clone(),
            records: Vec::new(),
            label: label.to_string(),
            next_ordinal: 0,
        };
        for spec in specs {
            fleet.provision(spec, now);
        }
        fleet.activate_all(now)
    }

    fn activate_all(mut self, now: f64) -> Result<Self> {
        for record in &mut self.records {
            record.transition(ReplicaState::Initializing, now)?;
            record.transition(ReplicaState::Active, now)?;
            record.ready_at = None;
        }
        Ok(self)
    }

    /// Guid of the replica with this ordinal; relaunches keep it.
    pub fn peer_for(label: &str, ordinal: usize) -> PeerGuid {
        PeerGuid::from_label(&format!("{label}/replica-{ordinal}"))
    }

    fn launch_delay(&self, spec: &ReplicaSpec) -> f64 {
        let seconds = match (&spec.kind, &spec.failure_model) {
            (ReplicaKind::Spot, Some(model)) => model.recovery_time_s,
            _ => self.policy.launch_time_s,
        };
        seconds * self.policy.time_scale
    }

    fn provision(&mut self, spec: ReplicaSpec, now: f64) -> FleetAction {
        let peer = Self::peer_for(&self.label, self.next_ordinal);
        self.next_ordinal += 1;
        let action = FleetAction::Launch {
            peer,
            spec: spec.name.clone(),
            region: spec.region.clone(),
        };
        let ready_at = now + self.launch_delay(&spec);
        self.records.push(ReplicaRecord {
            spec,
            peer,
            state: ReplicaState::Provisioning,
            endpoint: None,
            state_since: now,
            draining: false,
            ready_at: Some(ready_at),
        });
        action
    }

    pub fn policy(&self) -> &FleetPolicy {
        &self.policy
    }

    pub fn records(&self) -> &[ReplicaRecord] {
        &self.records
    }

    pub fn record(&self, peer: &PeerGuid) -> Option<&ReplicaRecord> {
        self.records.iter().find(|r| r.peer == *peer)
    }

    pub fn set_endpoint(&mut self, peer: &PeerGuid, endpoint: Option<String>) -> Result<()> {
        let rec = self
            .records
            .iter_mut()
            .find(|r| r.peer == *peer)
            .ok_or(FleetError::UnknownReplica(*peer))?;
        rec.endpoint = endpoint;
        Ok(())
    }

    pub fn active_count(&self) -> usize {
        self.records.iter().filter(|r| r.state == ReplicaState::Active).count()
    }

    /// Non-retired records, including preempted ones awaiting relaunch.
    pub fn live_count(&self) -> usize {
        self.records.iter().filter(|r| r.is_live()).count()
    }

    /// Active replicas that should receive new requests.
    pub fn serving(&self) -> impl Iterator<Item = &ReplicaRecord> {
        self.records.iter().filter(|r| r.state == ReplicaState::Active && !r.draining)
    }

    /// Applies events, then advances every timer due at `now`.
    pub fn tick(&mut self, events: &[FleetEvent], now: f64) -> Vec<FleetAction> {
        let mut actions = Vec::new();
        for event in events {
            match event {
                FleetEvent::Preempted { peer } => {
                    let delay = match self.records.iter().find(|r| r.peer == *peer) {
                        Some(r) => self.launch_delay(&r.spec),
                        None => continue,
                    };
                    let Some(rec) = self.records.iter_mut().find(|r| r.peer == *peer) else {
                        continue;
                    };
                    if let Err(err) = rec.transition(ReplicaState::Preempted, now) {
                        log::debug!("ignoring preemption: {err}");
                        continue;
                    }
                    rec.endpoint = None;
                    if rec.draining {
                        // Nothing left to relaunch for.
                        rec.transition(ReplicaState::Retired, now).expect("retire is always legal");
                        actions.push(FleetAction::Retire { peer: *peer });
                        continue;
                    }
                    rec.transition(ReplicaState::Relaunching, now).expect("preempted -> relaunching");
                    rec.ready_at = Some(now + delay);
                    actions.push(FleetAction::Relaunch {
                        peer: *peer,
                        region: rec.spec.region.clone(),
                    });
                }
                FleetEvent::Drained { peer } => {
                    if let Some(rec) = self.records.iter_mut().find(|r| r.peer == *peer && r.draining && r.is_live()) {
                        rec.transition(ReplicaState::Retired, now).expect("retire is always legal");
                        actions.push(FleetAction::Retire { peer: *peer });
                    }
                }
            }
        }
        for rec in &mut self.records {
            let due = rec.ready_at.is_some_and(|t| t <= now);
            if !due {
                continue;
            }
            let step = match rec.state {
                ReplicaState::Provisioning | ReplicaState::Relaunching => rec
                    .transition(ReplicaState::Initializing, now)
                    .and_then(|_| rec.transition(ReplicaState::Active, now)),
                _ => Ok(()),
            };
            rec.ready_at = None;
            if step.is_ok() && rec.state == ReplicaState::Active {
                actions.push(FleetAction::Advertise { peer: rec.peer });
            }
        }
        actions
    }

    /// Earliest pending launch or relaunch completion.
    pub fn next_ready_at(&self) -> Option<f64> {
        self.records.iter().filter_map(|r| r.ready_at).reduce(f64::min)
    }

    /// Adds `count` replicas from the catalog, or drains the `count` most
    /// expensive ones. Draining replicas retire on [`FleetEvent::Drained`].
    pub fn scale(&mut self, direction: ScaleDirection, count: usize, now: f64) -> Result<Vec<FleetAction>> {
        match direction {
            ScaleDirection::Up => {
                let in_service = self.records.iter().filter(|r| r.is_live() && !r.draining).count();
                let grown = FleetPolicy {
                    min_replicas: in_service + count,
                    target_system_failure: None,
                    ..self.policy.clone()
                };
                let specs = plan(&grown, &self.catalog)?;
                // Keep the region spread: take the tail of the larger plan.
                Ok(specs.into_iter().skip(in_service).map(|s| self.provision(s, now)).collect())
            }
            ScaleDirection::Down => {
                let mut candidates: Vec<usize> = (0..self.records.len())
                    .filter(|&i| self.records[i].is_live() && !self.records[i].draining)
                    .collect();
                let remaining = candidates.len().saturating_sub(count);
                if count > candidates.len() || remaining < self.policy.min_replicas {
                    return Err(FleetError::BelowMinimum {
                        requested: count,
                        remaining,
                        minimum: self.policy.min_replicas,
                    });
                }
                // Most expensive first; newest first among equal prices.
                candidates.sort_by(|&a, &b| {
                    self.records[b]
                        .spec
                        .price_per_hour
                        .total_cmp(&self.records[a].spec.price_per_hour)
                        .then(b.cmp(&a))
                });
                let mut actions = Vec::new();
                for i in candidates.into_iter().take(count) {
                    let rec = &mut self.records[i];
                    rec.draining = true;
                    if rec.state == ReplicaState::Active {
                        actions.push(FleetAction::Drain { peer: rec.peer });
                    } else {
                        // Not serving, nothing to drain.
                        rec.transition(ReplicaState::Retired, now).expect("retire is always legal");
                        rec.ready_at = None;
                        actions.push(FleetAction::Retire { peer: rec.peer });
                    }
                }
                Ok(actions)
            }
        }
    }

    /// Sum of hourly prices over non-retired replicas.
    pub fn hourly_cost(&self) -> f64 {
        hourly_cost(&self.records)
    }
}

pub fn hourly_cost(records: &[ReplicaRecord]) -> f64 {
    records.iter().filter(|r| r.is_live()).map(|r| r.spec.price_per_hour).sum()
}

/// Carries out launch and retire actions.
pub trait Provisioner {
    /// Starts (or restarts) the replica and returns its endpoint.
    fn launch(&mut self, record: &ReplicaRecord) -> Result<String>;
    fn terminate(&mut self, peer: &PeerGuid) -> Result<()>;
}

/// Applies provisioning side effects for `actions` and records endpoints.
pub fn execute(fleet: &mut Fleet, actions: &[FleetAction], provisioner: &mut dyn Provisioner) -> Result<()> {
    for action in actions {
        match action {
            FleetAction::Launch { peer, .. } | FleetAction::Relaunch { peer, .. } => {
                let record = fleet.record(peer).ok_or(FleetError::UnknownReplica(*peer))?.clone();
                let endpoint = provisioner.launch(&record)?;
                fleet.set_endpoint(peer, Some(endpoint))?;
            }
            FleetAction::Retire { peer } => {
                provisioner.terminate(peer)?;
                fleet.set_endpoint(peer, None)?;
            }
            FleetAction::Advertise { .. } | FleetAction::Drain { .. } => {}
        }
    }
    Ok(())
}

/// In-memory provisioner for simulations: hands out synthetic endpoints.
#[derive(Debug, Default)]
pub struct SimProvisioner {
    launches: HashMap<PeerGuid, usize>,
}

impl SimProvisioner {
    pub fn launches(&self, peer: &PeerGuid) -> usize {
        self.launches.get(peer).copied().unwrap_or(0)
    }
}

impl Provisioner for SimProvisioner {
    fn launch(&mut self, record: &ReplicaRecord) -> Result<String> {
        let n = self.launches.entry(record.peer).or_default();
        *n += 1;
        Ok(format!("sim://{}/{}#{}", record.spec.region, &record.peer.to_hex()[..12], n))
    }

    fn terminate(&mut self, _peer: &PeerGuid) -> Result<()> {
        Ok(())
    }
}

type ArgsFn = Box<dyn Fn(&ReplicaRecord) -> Vec<String> + Send>;

/// Runs each replica as a local child process. The child must print its
/// endpoint as the first line on stdout.
pub struct LocalProcessProvisioner {
    program: PathBuf,
    args: ArgsFn,
    children: HashMap<PeerGuid, Child>,
    startup_timeout: Duration,
}

impl LocalProcessProvisioner {
    pub fn new(program: impl Into<PathBuf>, args: impl Fn(&ReplicaRecord) -> Vec<String> + Send + 'static) -> Self {
        Self {
            program: program.into(),
            args: Box::new(args),
            children: HashMap::new(),
            startup_timeout: Duration::from_secs(10),
        }
    }

    /// Kills a replica's process without telling the fleet, as a provider
    /// preemption would.
    pub fn kill(&mut self, peer: &PeerGuid) -> bool {
        match self.children.remove(peer) {
            Some(mut child) => {
                let _ = child.kill();
                let _ = child.wait();
                true
            }
            None => false,
        }
    }

    pub fn pid(&self, peer: &PeerGuid) -> Option<u32> {
        self.children.get(peer).map(Child::id)
    }
}

impl Provisioner for LocalProcessProvisioner {
    fn launch(&mut self, record: &ReplicaRecord) -> Result<String> {
        self.kill(&record.peer);
        let mut child = Command::new(&self.program)
            .args((self.args)(record))
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| FleetError::Provisioner(format!("spawning {}: {e}", self.program.display())))?;
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let mut lines = BufReader::new(stdout).lines();
            let _ = tx.send(lines.next());
            // Keep draining so the child never blocks on a full pipe.
            for _ in lines {}
        });
        let endpoint = match rx.recv_timeout(self.startup_timeout) {
            Ok(Some(Ok(line))) => line.trim().to_string(),
            _ => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(FleetError::Provisioner(format!(
                    "replica {:?} did not report an endpoint",
                    record.peer
                )));
            }
        };
        self.children.insert(record.peer, child);
        Ok(endpoint)
    }

    fn terminate(&mut self, peer: &PeerGuid) -> Result<()> {
        self.kill(peer);
        Ok(())
    }
}

impl Drop for LocalProcessProvisioner {
    fn drop(&mut self) {
        let peers: Vec<_> = self.children.keys().copied().collect();
        for p in peers {
            self.kill(&p);
        }
    }
}
