use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use bytes::Bytes;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::config::{FaultInjector, MatcherMode, ScenarioConfig, Schedule, TopologyConfig};
use super::trace::{PathOutcome, PathStatus, TraceRecord};
use super::{stream, SimError, Variant, DOMAIN_ARRIVALS, DOMAIN_COSTS, DOMAIN_PATH, DOMAIN_PREEMPT};
use crate::discovery::PeerGuid;
use crate::fleet::{Fleet, FleetAction, FleetEvent, FleetPolicy, ReplicaState};
use crate::matcher::{CostMatrix, Matcher};
use crate::proxy::wire::HEADER_LEN;
use crate::proxy::{new_request_id, PendingRegistry, RequestId, ResponseOutcome, Sinks, TimeoutOutcome};

/// Samples per path when estimating miss probabilities for the matcher.
const COST_SAMPLES: usize = 4000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SimEvent {
    Preempted {
        server: String,
    },
    /// A scripted preemption hit a server that was not serving.
    PreemptionSkipped {
        server: String,
    },
    Fleet {
        server: String,
        action: FleetAction,
    },
    /// Matched mode picked a new server per interface.
    Reassigned {
        servers: Vec<Option<String>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLogEntry {
    pub t_ms: f64,
    #[serde(flatten)]
    pub event: SimEvent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub trace: Vec<TraceRecord>,
    pub events: Vec<EventLogEntry>,
}

#[derive(Debug, Clone, Copy)]
enum Ev {
    /// Fleet timers first so a replica back at `t` serves work arriving at `t`.
    FleetTimer,
    Preempt {
        server: usize,
        random: bool,
    },
    /// A response reaches the robot; before the deadline check at equal times.
    AtRobot {
        request: usize,
        slot: usize,
    },
    AtServer {
        request: usize,
        slot: usize,
        compute: f64,
        down: f64,
    },
    Done {
        request: usize,
        slot: usize,
        incarnation: u64,
        down: f64,
    },
    Deadline {
        request: usize,
    },
    Send {
        request: usize,
    },
}

impl Ev {
    fn rank(&self) -> u8 {
        match self {
            Ev::FleetTimer => 0,
            Ev::Preempt { .. } => 1,
            Ev::AtRobot { .. } => 2,
            Ev::AtServer { .. } => 3,
            Ev::Done { .. } => 4,
            Ev::Deadline { .. } => 5,
            Ev::Send { .. } => 6,
        }
    }
}

struct Scheduled {
    t: f64,
    rank: u8,
    seq: u64,
    ev: Ev,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .t
            .total_cmp(&self.t)
            .then(other.rank.cmp(&self.rank))
            .then(other.seq.cmp(&self.seq))
    }
}

fn in_window(t: f64, start: f64, end: Option<f64>) -> bool {
    t >= start && end.is_none_or(|e| t < e)
}

/// Does `[a, b]` touch a burst `[start + kP, start + kP + B)` inside the window?
fn overlaps_burst(a: f64, b: f64, start: f64, end: Option<f64>, period: f64, burst: f64) -> bool {
    let a = a.max(start);
    let b = end.map_or(b, |e| b.min(e));
    if a > b || burst <= 0.0 {
        return false;
    }
    let k = ((a - start) / period).floor();
    let burst_start = start + k * period;
    a < burst_start + burst || burst_start + period <= b
}

struct Pending {
    record: TraceRecord,
    id: RequestId,
    slots: Vec<Option<PathOutcome>>,
}

struct Engine<'a> {
    cfg: &'a ScenarioConfig,
    path_iface: Vec<usize>,
    path_server: Vec<usize>,
    allowed: Vec<usize>,
    variant_servers: BTreeSet<usize>,
    fleet: Fleet,
    incarnation: Vec<u64>,
    queue: BinaryHeap<Scheduled>,
    seq: u64,
    registry: PendingRegistry<usize>,
    requests: Vec<Pending>,
    events: Vec<EventLogEntry>,
    random_preempt: Vec<Option<f64>>,
    preempt_draws: Vec<u64>,
    matched: Option<MatchedState>,
    guid: PeerGuid,
}

struct MatchedState {
    matcher: Matcher,
    /// Variant interfaces and servers, in config order.
    rows: Vec<usize>,
    cols: Vec<usize>,
    base: Vec<Vec<f64>>,
    path_at: Vec<Vec<Option<usize>>>,
    mask: Option<Vec<bool>>,
    chosen: Vec<Option<usize>>,
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a ScenarioConfig, variant: &Variant) -> Result<Self, SimError> {
        cfg.validate()?;
        let allowed = variant.paths(cfg)?;
        let path_iface: Vec<usize> = cfg
            .paths
            .iter()
            .map(|p| cfg.interface_index(&p.interface).expect("validated"))
            .collect();
        let path_server: Vec<usize> = cfg.paths.iter().map(|p| cfg.server_index(&p.server).expect("validated")).collect();
        let variant_servers: BTreeSet<usize> = allowed.iter().map(|&p| path_server[p]).collect();
        let policy = FleetPolicy {
            min_replicas: 1,
            // Fleet clock runs in simulated milliseconds.
            time_scale: cfg.time_scale * 1000.0,
            ..FleetPolicy::default()
        };
        let fleet = Fleet::adopt("sim", policy, cfg.servers.clone(), 0.0).map_err(|e| SimError::InvalidConfig {
            field: "servers".into(),
            reason: e.to_string(),
        })?;
        let mut engine = Self {
            cfg,
            path_iface,
            path_server,
            allowed,
            variant_servers,
            fleet,
            incarnation: vec![0; cfg.servers.len()],
            queue: BinaryHeap::new(),
            seq: 0,
            registry: PendingRegistry::with_tombstones(1 << 17),
            requests: Vec::new(),
            events: Vec::new(),
            random_preempt: vec![None; cfg.servers.len()],
            preempt_draws: vec![0; cfg.servers.len()],
            matched: None,
            guid: PeerGuid::from_label("sim/robot"),
        };
        if cfg.matcher_mode == MatcherMode::Matched {
            engine.matched = Some(engine.matched_state());
        }
        engine.schedule_sends();
        engine.schedule_preemptions();
        Ok(engine)
    }

    fn push(&mut self, t: f64, ev: Ev) {
        self.seq += 1;
        self.queue.push(Scheduled {
            t,
            rank: ev.rank(),
            seq: self.seq,
            ev,
        });
    }

    fn log(&mut self, t_ms: f64, event: SimEvent) {
        self.events.push(EventLogEntry { t_ms, event });
    }

    fn schedule_sends(&mut self) {
        let mut times = Vec::new();
        match self.cfg.schedule {
            Schedule::Interval { interval_ms } => {
                let mut k = 0u64;
                loop {
                    let t = k as f64 * interval_ms;
                    if t >= self.cfg.duration_ms {
                        break;
                    }
                    times.push(t);
                    k += 1;
                }
            }
            Schedule::Poisson { rate_per_s } => {
                let mut rng = stream(self.cfg.seed, DOMAIN_ARRIVALS, 0, 0);
                let gap = Exp::new(rate_per_s / 1000.0).expect("validated rate");
                let mut t = gap.sample(&mut rng);
                while t < self.cfg.duration_ms {
                    times.push(t);
                    t += gap.sample(&mut rng);
                }
            }
        }
        for (request, &t) in times.iter().enumerate() {
            self.push(t, Ev::Send { request });
        }
    }

    fn schedule_preemptions(&mut self) {
        let cfg = self.cfg;
        for fault in &cfg.faults {
            if let FaultInjector::Preemption {
                server,
                failure_model,
                at_ms,
            } = fault
            {
                let j = cfg.server_index(server).expect("validated");
                if at_ms.is_empty() {
                    let model = failure_model.or(cfg.servers[j].failure_model).expect("spot servers carry a model");
                    self.random_preempt[j] = Some(model.mean_uptime_s * 1000.0 * cfg.time_scale);
                    self.schedule_random_preemption(j, 0.0);
                } else {
                    for &t in at_ms {
                        self.push(t, Ev::Preempt { server: j, random: false });
                    }
                }
            }
        }
    }

    fn schedule_random_preemption(&mut self, server: usize, now: f64) {
        let Some(mean) = self.random_preempt[server] else { return };
        let draw = self.preempt_draws[server];
        self.preempt_draws[server] += 1;
        let mut rng = stream(self.cfg.seed, DOMAIN_PREEMPT, server as u64, draw);
        let t = now + Exp::new(1.0 / mean).expect("positive mean").sample(&mut rng);
        if t < self.cfg.duration_ms {
            self.push(t, Ev::Preempt { server, random: true });
        }
    }

    fn server_up(&self, j: usize) -> bool {
        self.fleet.records()[j].state == ReplicaState::Active
    }

    fn interface_down(&self, i: usize, t: f64) -> bool {
        self.cfg.faults.iter().any(|f| match f {
            FaultInjector::InterfaceOutage {
                interface,
                start_ms,
                end_ms,
            } => self.cfg.interfaces[i].name == *interface && in_window(t, *start_ms, Some(*end_ms)),
            _ => false,
        })
    }

    fn slowdown(&self, j: usize, t: f64) -> f64 {
        self.cfg
            .faults
            .iter()
            .map(|f| match f {
                FaultInjector::RegionSlowdown {
                    region,
                    added_ms,
                    start_ms,
                    end_ms,
                } if self.cfg.servers[j].region == *region && in_window(t, *start_ms, *end_ms) => *added_ms,
                _ => 0.0,
            })
            .sum()
    }

    fn contention(&self, j: usize, from: f64, compute: f64) -> f64 {
        self.cfg
            .faults
            .iter()
            .map(|f| match f {
                FaultInjector::Oversubscription {
                    server,
                    load_factor,
                    period_ms,
                    burst_ms,
                    start_ms,
                    end_ms,
                } if self.cfg.servers[j].name == *server
                    && overlaps_burst(
                        from,
                        from + compute,
                        *start_ms,
                        *end_ms,
                        *period_ms,
                        burst_ms.unwrap_or(period_ms / 2.0),
                    ) =>
                {
                    load_factor * compute
                }
                _ => 0.0,
            })
            .sum()
    }

    fn matched_state(&self) -> MatchedState {
        let cfg = self.cfg;
        let rows: Vec<usize> = (0..cfg.interfaces.len())
            .filter(|i| self.allowed.iter().any(|&p| self.path_iface[p] == *i))
            .collect();
        let cols: Vec<usize> = self.variant_servers.iter().copied().collect();
        let mut base = vec![vec![1.0; cols.len()]; rows.len()];
        let mut path_at = vec![vec![None; cols.len()]; rows.len()];
        for &p in &self.allowed {
            let r = rows.iter().position(|&i| i == self.path_iface[p]).expect("row exists");
            let c = cols.iter().position(|&j| j == self.path_server[p]).expect("col exists");
            let mut rng = stream(cfg.seed, DOMAIN_COSTS, p as u64, 0);
            let compute = &cfg.servers[self.path_server[p]].compute_model;
            let misses = (0..COST_SAMPLES)
                .filter(|_| cfg.paths[p].latency.sample(&mut rng) + compute.sample(&mut rng) > cfg.deadline_ms)
                .count();
            base[r][c] = misses as f64 / COST_SAMPLES as f64;
            path_at[r][c] = Some(p);
        }
        MatchedState {
            matcher: Matcher::new(cfg.objective, 0.0),
            chosen: vec![None; rows.len()],
            rows,
            cols,
            base,
            path_at,
            mask: None,
        }
    }

    /// Paths to send on at `t`.
    fn assigned(&mut self, t: f64) -> Result<Vec<usize>, SimError> {
        let Some(mut m) = self.matched.take() else {
            return Ok(self.allowed.clone());
        };
        let mask: Vec<bool> = m
            .rows
            .iter()
            .map(|&i| !self.interface_down(i, t))
            .chain(m.cols.iter().map(|&j| self.server_up(j)))
            .collect();
        if m.mask.as_ref() != Some(&mask) {
            let (row_ok, col_ok) = mask.split_at(m.rows.len());
            let eps: Vec<Vec<f64>> = m
                .base
                .iter()
                .enumerate()
                .map(|(r, row)| {
                    row.iter()
                        .enumerate()
                        .map(|(c, &e)| if row_ok[r] && col_ok[c] { e } else { 1.0 })
                        .collect()
                })
                .collect();
            let costs = CostMatrix::new(eps, None).map_err(|e| SimError::Matcher(e.to_string()))?;
            let solution = m.matcher.update(&costs).map_err(|e| SimError::Matcher(e.to_string()))?;
            // A masked-out pair stays in the assignment but carries nothing.
            let chosen: Vec<Option<usize>> = (0..m.rows.len())
                .map(|r| {
                    let c = solution.assignment.server_for(r);
                    m.path_at[r][c].filter(|_| row_ok[r] && col_ok[c])
                })
                .collect();
            if chosen != m.chosen {
                let servers = chosen.iter().map(|p| p.map(|p| self.cfg.paths[p].server.clone())).collect();
                self.log(t, SimEvent::Reassigned { servers });
            }
            m.chosen = chosen;
            m.mask = Some(mask);
        }
        let out = m.chosen.iter().flatten().copied().collect();
        self.matched = Some(m);
        Ok(out)
    }

    fn on_send(&mut self, request: usize, t: f64) -> Result<(), SimError> {
        let cfg = self.cfg;
        let assigned = self.assigned(t)?;
        let frame = (HEADER_LEN + cfg.payload_bytes) as u64;
        let egress_frames = match cfg.topology {
            TopologyConfig::Direct => assigned.len(),
            TopologyConfig::Gateway { .. } => assigned.iter().map(|&p| self.path_iface[p]).collect::<BTreeSet<_>>().len(),
        };
        let id = new_request_id(&self.guid, request as u64);
        self.registry
            .register(id, t + cfg.deadline_ms, assigned.clone(), Sinks::noop())
            .expect("request ids are unique per run");
        let active_replicas = self.variant_servers.iter().filter(|&&j| self.server_up(j)).count();
        let mut slots = vec![None; assigned.len()];
        for (slot, &p) in assigned.iter().enumerate() {
            let (i, j) = (self.path_iface[p], self.path_server[p]);
            let mut rng = stream(cfg.seed, DOMAIN_PATH, request as u64, p as u64);
            let net = cfg.paths[p].latency.sample(&mut rng);
            let compute = cfg.servers[j].compute_model.sample(&mut rng);
            if self.interface_down(i, t) {
                slots[slot] = Some(PathOutcome {
                    path: p,
                    status: PathStatus::Lost,
                    latency_ms: None,
                });
                continue;
            }
            let half = 0.5 * (net + self.slowdown(j, t));
            // The gateway relays copies one after another.
            let relay = match cfg.topology {
                TopologyConfig::Gateway {
                    bandwidth_bytes_per_s: Some(bw),
                } => (slot + 1) as f64 * cfg.payload_bytes as f64 / bw * 1000.0,
                _ => 0.0,
            };
            self.push(
                t + half + relay,
                Ev::AtServer {
                    request,
                    slot,
                    compute,
                    down: half,
                },
            );
        }
        self.push(t + cfg.deadline_ms, Ev::Deadline { request });
        let outcomes = assigned
            .iter()
            .map(|&p| PathOutcome {
                path: p,
                status: PathStatus::Lost,
                latency_ms: None,
            })
            .collect();
        self.requests.push(Pending {
            record: TraceRecord {
                request: request as u64,
                send_ms: t,
                outcomes,
                winner: None,
                latency_ms: None,
                egress_bytes: egress_frames as u64 * frame,
                active_replicas,
            },
            id,
            slots,
        });
        Ok(())
    }

    fn lose(&mut self, request: usize, slot: usize) {
        let path = self.requests[request].record.outcomes[slot].path;
        self.requests[request].slots[slot] = Some(PathOutcome {
            path,
            status: PathStatus::Lost,
            latency_ms: None,
        });
    }

    fn on_preempt(&mut self, server: usize, random: bool, t: f64) {
        let name = self.cfg.servers[server].name.clone();
        if !self.server_up(server) {
            self.log(t, SimEvent::PreemptionSkipped { server: name });
            return;
        }
        let peer = self.fleet.records()[server].peer;
        let actions = self.fleet.tick(&[FleetEvent::Preempted { peer }], t);
        self.incarnation[server] += 1;
        self.log(t, SimEvent::Preempted { server: name });
        self.apply_fleet_actions(actions, t);
        if !random {
            // Scripted servers still relaunch but are not re-armed.
            self.random_preempt[server] = None;
        }
    }

    fn apply_fleet_actions(&mut self, actions: Vec<FleetAction>, t: f64) {
        for action in actions {
            let peer = match &action {
                FleetAction::Launch { peer, .. }
                | FleetAction::Relaunch { peer, .. }
                | FleetAction::Advertise { peer }
                | FleetAction::Drain { peer }
                | FleetAction::Retire { peer } => *peer,
            };
            let j = self.fleet.records().iter().position(|r| r.peer == peer).expect("fleet record");
            if let FleetAction::Advertise { .. } = action {
                self.schedule_random_preemption(j, t);
            }
            self.log(
                t,
                SimEvent::Fleet {
                    server: self.cfg.servers[j].name.clone(),
                    action,
                },
            );
        }
        if let Some(next) = self.fleet.next_ready_at() {
            self.push(next.max(t), Ev::FleetTimer);
        }
    }

    fn run(mut self) -> Result<SimOutput, SimError> {
        while let Some(Scheduled { t, ev, .. }) = self.queue.pop() {
            match ev {
                Ev::Send { request } => self.on_send(request, t)?,
                Ev::FleetTimer => {
                    let actions = self.fleet.tick(&[], t);
                    if !actions.is_empty() {
                        self.apply_fleet_actions(actions, t);
                    }
                }
                Ev::Preempt { server, random } => self.on_preempt(server, random, t),
                Ev::AtServer {
                    request,
                    slot,
                    compute,
                    down,
                } => {
                    let j = self.path_server[self.requests[request].record.outcomes[slot].path];
                    if !self.server_up(j) {
                        self.lose(request, slot);
                        continue;
                    }
                    let busy = compute + self.contention(j, t, compute);
                    let incarnation = self.incarnation[j];
                    self.push(
                        t + busy,
                        Ev::Done {
                            request,
                            slot,
                            incarnation,
                            down,
                        },
                    );
                }
                Ev::Done {
                    request,
                    slot,
                    incarnation,
                    down,
                } => {
                    let j = self.path_server[self.requests[request].record.outcomes[slot].path];
                    if !self.server_up(j) || self.incarnation[j] != incarnation {
                        self.lose(request, slot);
                        continue;
                    }
                    self.push(t + down, Ev::AtRobot { request, slot });
                }
                Ev::AtRobot { request, slot } => {
                    let path = self.requests[request].record.outcomes[slot].path;
                    if self.interface_down(self.path_iface[path], t) {
                        self.lose(request, slot);
                        continue;
                    }
                    let pending = &mut self.requests[request];
                    let latency = t - pending.record.send_ms;
                    let status = match self.registry.on_response(pending.id, Bytes::new()) {
                        ResponseOutcome::Delivered => {
                            pending.record.winner = Some(path);
                            pending.record.latency_ms = Some(latency);
                            PathStatus::Responded
                        }
                        ResponseOutcome::DroppedDuplicate => PathStatus::Responded,
                        ResponseOutcome::DroppedLate | ResponseOutcome::DroppedUnknown => PathStatus::Late,
                    };
                    pending.slots[slot] = Some(PathOutcome {
                        path,
                        status,
                        latency_ms: Some(latency),
                    });
                }
                Ev::Deadline { request } => {
                    let outcome = self.registry.on_timeout(self.requests[request].id);
                    debug_assert!(outcome == TimeoutOutcome::TimedOut || self.requests[request].record.winner.is_some());
                }
            }
        }
        debug_assert!(self.registry.is_empty());
        let trace = self
            .requests
            .into_iter()
            .map(|p| {
                let mut record = p.record;
                for (slot, outcome) in p.slots.into_iter().enumerate() {
                    debug_assert!(outcome.is_some(), "every assigned path resolves");
                    if let Some(o) = outcome {
                        record.outcomes[slot] = o;
                    }
                }
                record
            })
            .collect();
        Ok(SimOutput {
            trace,
            events: self.events,
        })
    }
}

/// Runs the scenario on every configured path.
pub fn run(cfg: &ScenarioConfig) -> Result<SimOutput, SimError> {
    run_variant(cfg, &Variant::Replicated)
}

pub fn run_variant(cfg: &ScenarioConfig, variant: &Variant) -> Result<SimOutput, SimError> {
    Engine::new(cfg, variant)?.run()
}
