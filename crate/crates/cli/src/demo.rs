//! Loopback deployment: a directory process, one process per replica and an
//! in-process robot client replicating every request over UDP.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, UdpSocket};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use bytes::Bytes;
use clap::Args;
use parking_lot::Mutex;
use replicast_core::discovery::{ConnectionId, Directory, DirectoryClient, DirectoryServer, PeerGuid, ServiceId};
use replicast_core::fleet::{self, Fleet, FleetAction, FleetEvent, LocalProcessProvisioner, ScaleDirection};
use replicast_core::proxy::net::{bind_interfaces, InterfaceSpec, Route, UdpServer};
use replicast_core::proxy::{Completion, ServerProxy, ServiceError, UdpClient};
use replicast_core::reliability::LatencyDistribution;
use replicast_core::sim::{MatcherMode, TopologyConfig};
use serde::{Deserialize, Serialize};

use crate::error::{self, CliError};
use crate::launch::LaunchConfig;

const HEARTBEAT_MS: u64 = 200;
const LOOKUP_EVERY: Duration = Duration::from_millis(100);
const CONTROL_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    directory: SocketAddr,
    #[arg(long)]
    peer: PeerGuid,
    #[arg(long)]
    service: String,
    #[arg(long, default_value_t = 0.0)]
    compute_ms: f64,
}

/// Replica process: echoes requests prefixed with its peer id so the robot
/// can tell which replica won, and keeps its directory entry fresh.
pub fn serve(args: ServeArgs) -> Result<(), CliError> {
    let socket = UdpSocket::bind("127.0.0.1:0").map_err(CliError::internal)?;
    let tag = format!("{} ", args.peer.to_hex());
    let service = move |req: &Bytes| -> Result<Bytes, ServiceError> {
        let mut out = Vec::with_capacity(tag.len() + req.len());
        out.extend_from_slice(tag.as_bytes());
        out.extend_from_slice(req);
        Ok(Bytes::from(out))
    };
    let mut proxy = ServerProxy::new(Arc::new(service));
    if args.compute_ms > 0.0 {
        proxy = proxy.with_compute_model(LatencyDistribution::constant(args.compute_ms), 0);
    }
    let server = UdpServer::spawn(socket, Arc::new(proxy)).map_err(CliError::internal)?;
    let addr = server.local_addr();
    println!("{addr}");
    std::io::stdout().flush().map_err(CliError::internal)?;

    let service_id = ServiceId::from_label(&args.service);
    loop {
        thread::sleep(Duration::from_millis(HEARTBEAT_MS));
        // The directory may be gone; serving continues regardless.
        let Ok(dc) = DirectoryClient::connect(args.directory, Duration::from_millis(HEARTBEAT_MS)) else {
            continue;
        };
        match dc.heartbeat(args.peer) {
            Ok(0) => {
                let _ = dc.advertise(service_id, args.peer, vec![addr]);
            }
            Ok(_) => {}
            Err(e) => log::debug!("heartbeat failed: {e}"),
        }
    }
}

/// Directory process: prints its address, then serves until killed.
pub fn directory(bind: SocketAddr) -> Result<(), CliError> {
    let server = DirectoryServer::bind(bind, Directory::with_heartbeat_interval(HEARTBEAT_MS as f64)).map_err(CliError::user)?;
    println!("{}", server.local_addr());
    std::io::stdout().flush().map_err(CliError::internal)?;
    loop {
        thread::park();
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScaleRequest {
    pub direction: String,
    pub count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScaleReply {
    pub ok: bool,
    pub message: String,
    pub replicas: usize,
}

pub fn scale(direction: &str, count: usize, fleet: SocketAddr) -> Result<(), CliError> {
    let socket = UdpSocket::bind("127.0.0.1:0").map_err(CliError::internal)?;
    socket.set_read_timeout(Some(CONTROL_TIMEOUT)).map_err(CliError::internal)?;
    let request = serde_json::to_vec(&ScaleRequest {
        direction: direction.to_string(),
        count,
    })
    .map_err(CliError::internal)?;
    socket
        .send_to(&request, fleet)
        .map_err(|e| CliError::user(format!("cannot reach fleet at {fleet}: {e}")))?;
    let mut buf = [0u8; 4096];
    let n = match socket.recv(&mut buf) {
        Ok(n) => n,
        Err(e) => return Err(CliError::user(format!("no fleet answering at {fleet}: {e}"))),
    };
    let reply: ScaleReply = serde_json::from_slice(&buf[..n]).map_err(|e| CliError::user(format!("bad reply from {fleet}: {e}")))?;
    if !reply.ok {
        return Err(CliError::user(format!("scale refused: {}", reply.message)));
    }
    println!("{} replicas={}", reply.message, reply.replicas);
    Ok(())
}

/// Spawns `replicast directory` and reads back its address.
fn spawn_directory(exe: &Path) -> Result<(Child, SocketAddr), CliError> {
    let mut child = Command::new(exe)
        .args(["directory", "--bind", "127.0.0.1:0"])
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(|e| CliError::internal(format!("spawning directory: {e}")))?;
    let mut line = String::new();
    BufReader::new(child.stdout.take().expect("piped stdout"))
        .read_line(&mut line)
        .map_err(CliError::internal)?;
    match line.trim().parse() {
        Ok(addr) => Ok((child, addr)),
        Err(_) => {
            let _ = child.kill();
            let _ = child.wait();
            Err(CliError::internal(format!(
                "directory printed `{}` instead of an address",
                line.trim()
            )))
        }
    }
}

/// Addresses and connection ids the robot has seen for each replica.
#[derive(Debug, Default, Clone, Serialize)]
struct PeerHistory {
    connection_ids: Vec<ConnectionId>,
    addresses: Vec<SocketAddr>,
}

/// Robot view of the service, refreshed from the directory in the
/// background and kept as-is while the directory is unreachable.
#[derive(Default)]
struct RouteTable {
    current: BTreeMap<PeerGuid, SocketAddr>,
    history: BTreeMap<PeerGuid, PeerHistory>,
    lookups_failed: usize,
}

struct Watcher {
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl Drop for Watcher {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn watch_directory(dir: SocketAddr, service: ServiceId, robot: PeerGuid, table: Arc<Mutex<RouteTable>>) -> Watcher {
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let thread = thread::spawn(move || {
        while !flag.load(Ordering::SeqCst) {
            let found = DirectoryClient::connect(dir, LOOKUP_EVERY).and_then(|dc| dc.lookup(service, Some(robot)));
            {
                let mut t = table.lock();
                match found {
                    Ok(records) => {
                        for r in records {
                            let Some(&addr) = r.addresses.first() else { continue };
                            t.current.insert(r.peer, addr);
                            let h = t.history.entry(r.peer).or_default();
                            if let Some(id) = r.connection_id {
                                if !h.connection_ids.contains(&id) {
                                    h.connection_ids.push(id);
                                }
                            }
                            if !h.addresses.contains(&addr) {
                                h.addresses.push(addr);
                            }
                        }
                    }
                    Err(_) => t.lookups_failed += 1,
                }
            }
            thread::sleep(LOOKUP_EVERY);
        }
    });
    Watcher {
        stop,
        thread: Some(thread),
    }
}

struct Orchestrator {
    fleet: Fleet,
    provisioner: LocalProcessProvisioner,
    started: Instant,
    directory: SocketAddr,
    service: ServiceId,
    /// Peers the robot may send to: active and not draining.
    serving: Arc<Mutex<HashSet<PeerGuid>>>,
}

impl Orchestrator {
    fn now(&self) -> f64 {
        self.started.elapsed().as_secs_f64() * 1e3
    }

    fn apply(&mut self, actions: Vec<FleetAction>) -> Result<(), CliError> {
        if actions.is_empty() {
            return Ok(());
        }
        fleet::execute(&mut self.fleet, &actions, &mut self.provisioner).map_err(CliError::internal)?;
        let mut follow_up = Vec::new();
        for action in &actions {
            log::info!("{}", serde_json::to_string(action).unwrap_or_default());
            match action {
                FleetAction::Advertise { peer } => {
                    let endpoint = self.fleet.record(peer).and_then(|r| r.endpoint.clone());
                    let addr = endpoint.as_deref().and_then(|e| e.parse().ok());
                    if let Some(addr) = addr {
                        if let Err(e) = DirectoryClient::connect(self.directory, CONTROL_TIMEOUT)
                            .and_then(|dc| dc.advertise(self.service, *peer, vec![addr]))
                        {
                            log::warn!("advertising {peer:?} failed: {e}");
                        }
                    }
                    self.serving.lock().insert(*peer);
                }
                FleetAction::Drain { peer } => {
                    self.serving.lock().remove(peer);
                    // Requests are sequential, so nothing is in flight here.
                    follow_up.push(FleetEvent::Drained { peer: *peer });
                }
                FleetAction::Relaunch { peer, .. } | FleetAction::Retire { peer } => {
                    self.serving.lock().remove(peer);
                }
                FleetAction::Launch { .. } => {}
            }
        }
        if !follow_up.is_empty() {
            let now = self.now();
            let more = self.fleet.tick(&follow_up, now);
            self.apply(more)?;
        }
        Ok(())
    }

    fn tick(&mut self, events: &[FleetEvent]) -> Result<(), CliError> {
        let now = self.now();
        let actions = self.fleet.tick(events, now);
        self.apply(actions)
    }

    fn handle_control(&mut self, socket: &UdpSocket) -> Result<(), CliError> {
        let mut buf = [0u8; 4096];
        while let Ok((n, from)) = socket.recv_from(&mut buf) {
            let reply = match serde_json::from_slice::<ScaleRequest>(&buf[..n]) {
                Ok(req) => self.scale(&req),
                Err(e) => ScaleReply {
                    ok: false,
                    message: format!("bad request: {e}"),
                    replicas: self.fleet.live_count(),
                },
            };
            let bytes = serde_json::to_vec(&reply).map_err(CliError::internal)?;
            let _ = socket.send_to(&bytes, from);
        }
        Ok(())
    }

    fn scale(&mut self, req: &ScaleRequest) -> ScaleReply {
        let direction: ScaleDirection = match req.direction.parse() {
            Ok(d) => d,
            Err(e) => {
                return ScaleReply {
                    ok: false,
                    message: e,
                    replicas: self.fleet.live_count(),
                }
            }
        };
        let now = self.now();
        let result = self
            .fleet
            .scale(direction, req.count, now)
            .map_err(|e| e.to_string())
            .and_then(|actions| self.apply(actions).map_err(|e| e.to_string()));
        let replicas = self.fleet.records().iter().filter(|r| r.is_live() && !r.draining).count();
        match result {
            Ok(()) => ScaleReply {
                ok: true,
                message: format!("scaled {} by {}", req.direction, req.count),
                replicas,
            },
            Err(message) => ScaleReply {
                ok: false,
                message,
                replicas,
            },
        }
    }
}

#[derive(Debug, Serialize)]
struct Ports {
    directory: SocketAddr,
    control: SocketAddr,
    replicas: BTreeMap<String, Option<String>>,
}

#[derive(Debug, Serialize)]
struct RequestRow {
    request: usize,
    sent_ms: f64,
    latency_ms: Option<f64>,
    timed_out: bool,
    winner: String,
    routes: usize,
}

pub fn demo(config: &Path, requests: usize, run_dir: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = LaunchConfig::from_toml(&error::read(config)?)?;
    if !matches!(cfg.topology, TopologyConfig::Direct) || cfg.matcher_mode != MatcherMode::AllPairs {
        return Err(CliError::user("demo runs the direct topology with all-pairs routing only"));
    }
    let svc = &cfg.services[0];
    let policy = cfg.policy(svc)?;
    let run_dir = run_dir.unwrap_or_else(|| std::env::temp_dir().join(format!("replicast-demo-{}", std::process::id())));
    error::create_dir(&run_dir)?;
    let exe = std::env::current_exe().map_err(CliError::internal)?;

    let (mut dir_child, dir_addr) = spawn_directory(&exe)?;
    let service = ServiceId::from_label(&svc.name);
    let robot = PeerGuid::from_label("robot");

    let args_exe = dir_addr.to_string();
    let service_name = svc.name.clone();
    let compute_ms = svc.compute_ms;
    let provisioner = LocalProcessProvisioner::new(exe.clone(), move |rec| {
        vec![
            "serve".into(),
            "--directory".into(),
            args_exe.clone(),
            "--peer".into(),
            rec.peer.to_hex(),
            "--service".into(),
            service_name.clone(),
            "--compute-ms".into(),
            compute_ms.to_string(),
        ]
    });
    let started = Instant::now();
    let (fleet, actions) = Fleet::launch(&svc.name, policy, svc.catalog.clone(), 0.0).map_err(CliError::user)?;
    let mut orch = Orchestrator {
        fleet,
        provisioner,
        started,
        directory: dir_addr,
        service,
        serving: Arc::new(Mutex::new(HashSet::new())),
    };
    let result = run_demo(&cfg, &mut orch, &mut dir_child, actions, requests, &run_dir, robot);
    let _ = dir_child.kill();
    let _ = dir_child.wait();
    result
}

fn run_demo(
    cfg: &LaunchConfig,
    orch: &mut Orchestrator,
    dir_child: &mut Child,
    initial: Vec<FleetAction>,
    requests: usize,
    run_dir: &Path,
    robot: PeerGuid,
) -> Result<(), CliError> {
    orch.apply(initial)?;
    let control = UdpSocket::bind("127.0.0.1:0").map_err(CliError::internal)?;
    control.set_nonblocking(true).map_err(CliError::internal)?;

    let ports = |orch: &Orchestrator| Ports {
        directory: orch.directory,
        control: control.local_addr().expect("bound"),
        replicas: orch.fleet.records().iter().map(|r| (r.peer.to_hex(), r.endpoint.clone())).collect(),
    };
    error::write(
        &run_dir.join("ports.json"),
        serde_json::to_string_pretty(&ports(orch)).map_err(CliError::internal)?,
    )?;
    println!(
        "directory {} control {}",
        orch.directory,
        control.local_addr().map_err(CliError::internal)?
    );

    // Wait for the initial launch to finish before sending.
    while orch.fleet.active_count() < orch.fleet.records().len() {
        let wait = orch.fleet.next_ready_at().map_or(0.0, |t| (t - orch.now()).max(0.0));
        thread::sleep(Duration::from_secs_f64(wait / 1e3 + 0.001));
        orch.tick(&[])?;
    }

    let specs: Vec<InterfaceSpec> = cfg
        .interfaces
        .iter()
        .map(|n| InterfaceSpec::new(n, "127.0.0.1:0".parse().expect("literal")))
        .collect();
    let bound = bind_interfaces(&specs, orch.directory, Duration::from_secs(1)).map_err(CliError::user)?;
    let interfaces: Vec<usize> = bound.active().map(|(i, _)| i).collect();
    let client = UdpClient::start(robot, bound).map_err(CliError::internal)?;

    let table = Arc::new(Mutex::new(RouteTable::default()));
    let watcher = watch_directory(orch.directory, orch.service, robot, table.clone());
    let deadline = Instant::now() + Duration::from_secs(10);
    while table.lock().current.is_empty() {
        if Instant::now() > deadline {
            return Err(CliError::internal("no replica appeared in the directory"));
        }
        thread::sleep(Duration::from_millis(10));
    }

    let chaos_peer = Fleet::peer_for(&cfg.services[0].name, cfg.chaos.replica);
    let mut rows = Vec::with_capacity(requests);
    let mut failures = 0usize;
    for i in 0..requests {
        let tick_started = Instant::now();
        if cfg.chaos.kill_replica_at == Some(i) && orch.provisioner.kill(&chaos_peer) {
            println!("chaos: killed replica {}", &chaos_peer.to_hex()[..12]);
            orch.tick(&[FleetEvent::Preempted { peer: chaos_peer }])?;
        }
        if cfg.chaos.kill_directory_at == Some(i) {
            let _ = dir_child.kill();
            let _ = dir_child.wait();
            println!("chaos: killed directory");
        }
        orch.tick(&[])?;
        orch.handle_control(&control)?;

        let routes: Vec<Route> = {
            let serving = orch.serving.lock();
            let t = table.lock();
            t.current
                .iter()
                .filter(|(p, _)| serving.contains(p))
                .flat_map(|(_, &addr)| interfaces.iter().map(move |&interface| Route { interface, addr }))
                .collect()
        };
        let sent = orch.now();
        let payload = Bytes::from(format!("req-{i}"));
        let outcome = if routes.is_empty() {
            None
        } else {
            let handle = client
                .client()
                .submit_waiting(payload, orch.service, &routes, cfg.deadline_ms)
                .map_err(CliError::internal)?;
            handle.wait(Duration::from_secs_f64(cfg.deadline_ms / 1e3) + CONTROL_TIMEOUT)
        };
        let latency = orch.now() - sent;
        let row = match outcome {
            Some(Completion::Response(body)) => {
                let winner = String::from_utf8_lossy(&body).split(' ').next().unwrap_or_default().to_string();
                println!("request {i}: winner {} {latency:.3} ms", &winner[..winner.len().min(12)]);
                RequestRow {
                    request: i,
                    sent_ms: sent,
                    latency_ms: Some(latency),
                    timed_out: false,
                    winner,
                    routes: routes.len(),
                }
            }
            _ => {
                failures += 1;
                println!("request {i}: FAILED after {latency:.3} ms");
                RequestRow {
                    request: i,
                    sent_ms: sent,
                    latency_ms: None,
                    timed_out: true,
                    winner: String::new(),
                    routes: routes.len(),
                }
            }
        };
        rows.push(row);
        let gap = Duration::from_secs_f64(cfg.interval_ms / 1e3);
        if let Some(rest) = gap.checked_sub(tick_started.elapsed()) {
            thread::sleep(rest);
        }
    }
    drop(watcher);

    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(CliError::internal)?;
    }
    error::write(&run_dir.join("requests.csv"), w.into_inner().map_err(CliError::internal)?)?;
    let history: BTreeMap<String, PeerHistory> = table.lock().history.iter().map(|(p, h)| (p.to_hex(), h.clone())).collect();
    error::write(
        &run_dir.join("connections.json"),
        serde_json::to_string_pretty(&history).map_err(CliError::internal)?,
    )?;
    error::write(
        &run_dir.join("ports.json"),
        serde_json::to_string_pretty(&ports(orch)).map_err(CliError::internal)?,
    )?;
    let lookups_failed = table.lock().lookups_failed;
    println!(
        "{requests} requests, {failures} failed, {lookups_failed} directory lookups failed, run dir {}",
        run_dir.display()
    );
    Ok(())
}
