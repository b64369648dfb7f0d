//! UDP transport: one frame per datagram, one worker pair (sender and
//! receiver thread) per bound interface.

use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use bytes::Bytes;
use serde::{Deserialize, Serialize};

use super::client::{Clock, MonotonicClock, ReplicatingClient, Transport};
use super::registry::PendingRegistry;
use super::server::ServerProxy;
use super::wire::{Envelope, MsgType, HEADER_LEN, MAX_PAYLOAD};
use super::ProxyError;
use crate::discovery::{PeerGuid, ServiceId};

const RECV_POLL: Duration = Duration::from_millis(20);
/// Largest UDP payload over IPv4.
pub const MAX_DATAGRAM: usize = 65_507;
const RECV_BUF: usize = HEADER_LEN + MAX_PAYLOAD;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceSpec {
    pub name: String,
    pub local: SocketAddr,
    /// Reflector reached through this interface, when it differs from the
    /// shared one.
    #[serde(default)]
    pub reflector: Option<SocketAddr>,
}

impl InterfaceSpec {
    pub fn new(name: impl Into<String>, local: SocketAddr) -> Self {
        Self {
            name: name.into(),
            local,
            reflector: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfaceStatus {
    Probing,
    Active,
    Failed,
}

/// One socket pinned to a local interface address.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceBinding {
    pub name: String,
    pub local_address: SocketAddr,
    pub reflected_address: Option<SocketAddr>,
    pub status: InterfaceStatus,
}

/// Asks a reflector which address it sees `socket` as. Retries until
/// `window` elapses.
pub fn probe_reflector(socket: &UdpSocket, reflector: SocketAddr, window: Duration) -> io::Result<Option<SocketAddr>> {
    let probe = Envelope::control(MsgType::AddrReflect, ServiceId::default(), Bytes::new())
        .encode()
        .expect("empty frame");
    let started = Instant::now();
    let retry = (window / 4).clamp(Duration::from_millis(5), Duration::from_millis(100));
    let mut buf = vec![0u8; RECV_BUF];
    while started.elapsed() < window {
        // Unreachable ports surface as send or recv errors on some platforms.
        if socket.send_to(&probe, reflector).is_err() {
            thread::sleep(retry.min(window.saturating_sub(started.elapsed())));
            continue;
        }
        let attempt_end = Instant::now() + retry;
        loop {
            let now = Instant::now();
            if now >= attempt_end || started.elapsed() >= window {
                break;
            }
            socket.set_read_timeout(Some((attempt_end - now).max(Duration::from_millis(1))))?;
            match socket.recv_from(&mut buf) {
                Ok((n, from)) if from == reflector => {
                    if let Ok(env) = Envelope::decode_slice(&buf[..n]) {
                        if env.msg_type == MsgType::AddrReply {
                            if let Ok(addr) = std::str::from_utf8(&env.payload).unwrap_or("").parse() {
                                socket.set_read_timeout(None)?;
                                return Ok(Some(addr));
                            }
                        }
                    }
                }
                Ok(_) => {}
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => break,
                Err(_) => {
                    thread::sleep(Duration::from_millis(1));
                }
            }
        }
    }
    socket.set_read_timeout(None)?;
    Ok(None)
}

/// Result of [`bind_interfaces`]: a binding per requested interface and a
/// socket for every active one.
#[derive(Debug)]
pub struct BoundInterfaces {
    pub bindings: Vec<InterfaceBinding>,
    sockets: Vec<Option<UdpSocket>>,
}

impl BoundInterfaces {
    pub fn active(&self) -> impl Iterator<Item = (usize, &InterfaceBinding)> {
        self.bindings
            .iter()
            .enumerate()
            .filter(|(_, b)| b.status == InterfaceStatus::Active)
    }
}

/// Binds and probes every interface on its own thread. An interface that
/// cannot bind or does not hear back from its reflector within
/// `probe_window` is marked failed without affecting the others.
pub fn bind_interfaces(specs: &[InterfaceSpec], reflector: SocketAddr, probe_window: Duration) -> Result<BoundInterfaces, ProxyError> {
    if specs.is_empty() {
        return Err(ProxyError::AllInterfacesFailed);
    }
    let probes: Vec<_> = specs
        .iter()
        .cloned()
        .map(|spec| {
            thread::spawn(move || {
                let target = spec.reflector.unwrap_or(reflector);
                let outcome = UdpSocket::bind(spec.local).and_then(|socket| {
                    let local = socket.local_addr()?;
                    let reflected = probe_reflector(&socket, target, probe_window)?;
                    Ok((socket, local, reflected))
                });
                (spec, outcome)
            })
        })
        .collect();

    let mut bindings = Vec::with_capacity(specs.len());
    let mut sockets = Vec::with_capacity(specs.len());
    for probe in probes {
        let (spec, outcome) = probe.join().expect("probe thread panicked");
        match outcome {
            Ok((socket, local, Some(reflected))) => {
                bindings.push(InterfaceBinding {
                    name: spec.name,
                    local_address: local,
                    reflected_address: Some(reflected),
                    status: InterfaceStatus::Active,
                });
                sockets.push(Some(socket));
            }
            Ok((_, local, None)) => {
                log::warn!("interface {} could not reach its reflector, dropping it", spec.name);
                bindings.push(InterfaceBinding {
                    name: spec.name,
                    local_address: local,
                    reflected_address: None,
                    status: InterfaceStatus::Failed,
                });
                sockets.push(None);
            }
            Err(err) => {
                log::warn!("interface {} failed to bind: {err}", spec.name);
                bindings.push(InterfaceBinding {
                    name: spec.name,
                    local_address: spec.local,
                    reflected_address: None,
                    status: InterfaceStatus::Failed,
                });
                sockets.push(None);
            }
        }
    }
    if bindings.iter().all(|b| b.status != InterfaceStatus::Active) {
        return Err(ProxyError::AllInterfacesFailed);
    }
    Ok(BoundInterfaces { bindings, sockets })
}

/// Where to send one replica: which interface, and the server address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Route {
    pub interface: usize,
    pub addr: SocketAddr,
}

enum Command {
    Send(SocketAddr, Bytes),
    Stall(Duration),
}

/// Called for every decoded inbound frame with the sender address and the
/// index of the interface it arrived on.
pub type FrameHandler = Arc<dyn Fn(Envelope, SocketAddr, usize) + Send + Sync>;

struct Worker {
    name: String,
    local: SocketAddr,
    tx: Sender<Command>,
}

/// Running interface workers. Implements [`Transport`] by queueing each
/// frame on the chosen interface's sender thread, so a stalled interface
/// never holds up another.
pub struct UdpInterfaces {
    workers: Vec<Option<Worker>>,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl UdpInterfaces {
    pub fn start(bound: BoundInterfaces, handler: FrameHandler) -> io::Result<Self> {
        let stop = Arc::new(AtomicBool::new(false));
        let mut workers = Vec::new();
        let mut threads = Vec::new();
        for (index, (binding, socket)) in bound.bindings.into_iter().zip(bound.sockets).enumerate() {
            let Some(socket) = socket else {
                workers.push(None);
                continue;
            };
            let (tx, rx) = mpsc::channel();
            let send_socket = socket.try_clone()?;
            threads.push(
                thread::Builder::new()
                    .name(format!("tx-{}", binding.name))
                    .spawn(move || sender_loop(send_socket, rx))?,
            );
            let (stop_rx, handler) = (stop.clone(), handler.clone());
            threads.push(
                thread::Builder::new()
                    .name(format!("rx-{}", binding.name))
                    .spawn(move || receiver_loop(socket, index, handler, stop_rx))?,
            );
            workers.push(Some(Worker {
                name: binding.name,
                local: binding.local_address,
                tx,
            }));
        }
        Ok(Self { workers, stop, threads })
    }

    pub fn interface_count(&self) -> usize {
        self.workers.len()
    }

    pub fn is_active(&self, interface: usize) -> bool {
        self.workers.get(interface).is_some_and(Option::is_some)
    }

    pub fn local_addr(&self, interface: usize) -> Option<SocketAddr> {
        self.workers.get(interface)?.as_ref().map(|w| w.local)
    }

    pub fn name(&self, interface: usize) -> Option<&str> {
        self.workers.get(interface)?.as_ref().map(|w| w.name.as_str())
    }

    /// Blocks the sender thread of one interface for `duration`.
    pub fn stall(&self, interface: usize, duration: Duration) {
        if let Some(Some(w)) = self.workers.get(interface) {
            let _ = w.tx.send(Command::Stall(duration));
        }
    }

    pub fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        self.workers.clear();
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for UdpInterfaces {
    fn drop(&mut self) {
        self.shutdown();
    }
}

impl Transport for UdpInterfaces {
    type Endpoint = Route;

    fn transmit(&self, to: &Route, frame: Bytes) -> io::Result<()> {
        if frame.len() > MAX_DATAGRAM {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "frame exceeds one datagram"));
        }
        match self.workers.get(to.interface) {
            Some(Some(w)) => {
                w.tx.send(Command::Send(to.addr, frame))
                    .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "interface worker stopped"))
            }
            _ => Err(io::Error::new(
                io::ErrorKind::NotConnected,
                format!("interface {} is not active", to.interface),
            )),
        }
    }
}

fn sender_loop(socket: UdpSocket, rx: Receiver<Command>) {
    for command in rx {
        match command {
            Command::Send(addr, frame) => {
                if let Err(err) = socket.send_to(&frame, addr) {
                    log::debug!("send to {addr} failed: {err}");
                }
            }
            Command::Stall(d) => thread::sleep(d),
        }
    }
}

fn receiver_loop(socket: UdpSocket, index: usize, handler: FrameHandler, stop: Arc<AtomicBool>) {
    let _ = socket.set_read_timeout(Some(RECV_POLL));
    let mut buf = vec![0u8; RECV_BUF];
    while !stop.load(Ordering::SeqCst) {
        match socket.recv_from(&mut buf) {
            Ok((n, from)) => match Envelope::decode_slice(&buf[..n]) {
                Ok(env) => handler(env, from, index),
                Err(err) => log::debug!("dropping malformed frame from {from}: {err}"),
            },
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(e) => {
                log::debug!("recv error: {e}");
                thread::sleep(Duration::from_millis(1));
            }
        }
    }
}

/// Background thread firing registry timeouts on `clock`.
pub struct ExpiryTimer {
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ExpiryTimer {
    pub fn spawn<A, C>(registry: Arc<PendingRegistry<A>>, clock: C) -> Self
    where
        A: Send + 'static,
        C: Clock + 'static,
    {
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let thread = thread::spawn(move || {
            while !flag.load(Ordering::SeqCst) {
                let now = clock.now_ms();
                registry.expire_due(now);
                let wait = registry.next_deadline().map_or(5.0, |d| (d - now).clamp(0.2, 5.0));
                thread::sleep(Duration::from_secs_f64(wait / 1e3));
            }
        });
        Self {
            stop,
            thread: Some(thread),
        }
    }
}

impl Drop for ExpiryTimer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Robot-side proxy over real interfaces: a [`ReplicatingClient`] whose
/// receivers feed responses straight into its registry, plus the timer
/// thread that fires deadlines.
pub struct UdpClient {
    client: ReplicatingClient<UdpInterfaces, MonotonicClock>,
    _expiry: ExpiryTimer,
}

impl UdpClient {
    pub fn start(guid: PeerGuid, bound: BoundInterfaces) -> io::Result<Self> {
        let registry: Arc<PendingRegistry<Route>> = Arc::new(PendingRegistry::new());
        let sink = registry.clone();
        let handler: FrameHandler = Arc::new(move |env: Envelope, _from, _iface| {
            if env.msg_type == MsgType::Response {
                sink.on_response(env.request_id, env.payload);
            }
        });
        let interfaces = UdpInterfaces::start(bound, handler)?;
        let clock = MonotonicClock::new();
        let expiry = ExpiryTimer::spawn(registry.clone(), clock);
        Ok(Self {
            client: ReplicatingClient::with_registry(guid, interfaces, clock, registry),
            _expiry: expiry,
        })
    }

    pub fn client(&self) -> &ReplicatingClient<UdpInterfaces, MonotonicClock> {
        &self.client
    }
}

/// Server proxy bound to a UDP socket, answering each request from the
/// thread that received it.
pub struct UdpServer {
    local: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl UdpServer {
    pub fn spawn(socket: UdpSocket, proxy: Arc<ServerProxy>) -> io::Result<Self> {
        let local = socket.local_addr()?;
        socket.set_read_timeout(Some(RECV_POLL))?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let thread = thread::Builder::new().name(format!("server-{local}")).spawn(move || {
            let mut buf = vec![0u8; RECV_BUF];
            while !flag.load(Ordering::SeqCst) {
                let (n, from) = match socket.recv_from(&mut buf) {
                    Ok(r) => r,
                    Err(_) => continue,
                };
                let Ok(request) = Envelope::decode_slice(&buf[..n]) else {
                    continue;
                };
                let Some(served) = proxy.serve(&request) else {
                    continue;
                };
                if served.compute_delay_ms > 0.0 {
                    thread::sleep(Duration::from_secs_f64(served.compute_delay_ms / 1e3));
                }
                if let Ok(frame) = served.response.encode() {
                    let _ = socket.send_to(&frame, from);
                }
            }
        })?;
        Ok(Self {
            local,
            stop,
            thread: Some(thread),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local
    }

    pub fn stop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for UdpServer {
    fn drop(&mut self) {
        self.stop();
    }
}
