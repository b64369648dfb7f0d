//! The directory and the address reflector, co-hosted on one UDP socket and
//! speaking the proxy frame format (message types 4 to 9). Requests are
//! handled by a single thread, so directory writes are serialized.

use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use bytes::Bytes;
use parking_lot::RwLock;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::directory::{reflect, DirectoryEntry, DisconnectAck};
use super::ids::{ConnectionId, PeerGuid, ServiceId};
use super::Directory;
use crate::proxy::{Clock, Envelope, MonotonicClock, MsgType, RequestId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvertisePayload {
    pub peer: PeerGuid,
    pub addresses: Vec<SocketAddr>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeartbeatPayload {
    pub peer: PeerGuid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookupPayload {
    /// When set, the directory records a connection between the client and
    /// every peer returned.
    #[serde(default)]
    pub client: Option<PeerGuid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookupRecord {
    pub peer: PeerGuid,
    pub addresses: Vec<SocketAddr>,
    pub connection_id: Option<ConnectionId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisconnectPayload {
    pub reporter: PeerGuid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub ok: bool,
    #[serde(default)]
    pub count: usize,
}

fn json<T: Serialize>(value: &T) -> Bytes {
    Bytes::from(serde_json::to_vec(value).expect("plain data serializes"))
}

/// Handles one control frame against the directory. Returns the reply, if
/// the frame warrants one.
pub fn handle_control(dir: &mut Directory, frame: &Envelope, from: SocketAddr, now_ms: f64) -> Option<Envelope> {
    let reply = |msg_type: MsgType, payload: Bytes| Envelope {
        msg_type,
        payload,
        ..frame.clone()
    };
    match frame.msg_type {
        MsgType::AddrReflect => Some(reflect(frame, from)),
        MsgType::Advertise => {
            let ad: AdvertisePayload = serde_json::from_slice(&frame.payload).ok()?;
            let addresses = if ad.addresses.is_empty() { vec![from] } else { ad.addresses };
            dir.advertise(DirectoryEntry {
                service_id: frame.service_id,
                peer: ad.peer,
                addresses,
                last_heartbeat_ms: now_ms,
            });
            Some(reply(MsgType::Advertise, json(&Ack { ok: true, count: 1 })))
        }
        MsgType::Heartbeat => {
            let hb: HeartbeatPayload = serde_json::from_slice(&frame.payload).ok()?;
            let refreshed = dir.heartbeat(&hb.peer, now_ms);
            Some(reply(
                MsgType::Heartbeat,
                json(&Ack {
                    ok: refreshed > 0,
                    count: refreshed,
                }),
            ))
        }
        MsgType::Lookup => {
            let query: LookupPayload = serde_json::from_slice(&frame.payload).unwrap_or(LookupPayload { client: None });
            let records: Vec<LookupRecord> = dir
                .lookup(&frame.service_id, now_ms)
                .into_iter()
                .map(|e| LookupRecord {
                    connection_id: query.client.map(|c| dir.register_connection(c, e.peer, frame.service_id)),
                    peer: e.peer,
                    addresses: e.addresses,
                })
                .collect();
            Some(reply(MsgType::LookupReply, json(&records)))
        }
        MsgType::DisconnectReport => {
            let report: DisconnectPayload = serde_json::from_slice(&frame.payload).ok()?;
            let DisconnectAck { known, purged } = dir.report_disconnect(&report.reporter, &frame.connection_id);
            Some(reply(MsgType::DisconnectReport, json(&Ack { ok: known, count: purged })))
        }
        _ => None,
    }
}

/// Running directory + reflector.
pub struct DirectoryServer {
    local: SocketAddr,
    state: Arc<RwLock<Directory>>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl DirectoryServer {
    pub fn spawn(socket: UdpSocket, directory: Directory) -> io::Result<Self> {
        let local = socket.local_addr()?;
        socket.set_read_timeout(Some(Duration::from_millis(20)))?;
        let state = Arc::new(RwLock::new(directory));
        let stop = Arc::new(AtomicBool::new(false));
        let (shared, flag) = (state.clone(), stop.clone());
        let clock = MonotonicClock::new();
        let thread = thread::Builder::new().name("directory".into()).spawn(move || {
            let mut buf = vec![0u8; 70_000];
            while !flag.load(Ordering::SeqCst) {
                let now = clock.now_ms();
                let received = socket.recv_from(&mut buf);
                let mut dir = shared.write();
                dir.evict(now);
                let Ok((n, from)) = received else { continue };
                let Ok(frame) = Envelope::decode_slice(&buf[..n]) else { continue };
                if let Some(reply) = handle_control(&mut dir, &frame, from, clock.now_ms()) {
                    drop(dir);
                    if let Ok(bytes) = reply.encode() {
                        let _ = socket.send_to(&bytes, from);
                    }
                }
            }
        })?;
        Ok(Self {
            local,
            state,
            stop,
            thread: Some(thread),
        })
    }

    pub fn bind(addr: SocketAddr, directory: Directory) -> io::Result<Self> {
        Self::spawn(UdpSocket::bind(addr)?, directory)
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local
    }

    /// Read-only copy of the current directory.
    pub fn snapshot(&self) -> Directory {
        self.state.read().clone()
    }

    pub fn stop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for DirectoryServer {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Blocking request/reply client for the directory, with retries.
pub struct DirectoryClient {
    socket: UdpSocket,
    server: SocketAddr,
    timeout: Duration,
    attempts: u32,
}

impl DirectoryClient {
    pub fn connect(server: SocketAddr, timeout: Duration) -> io::Result<Self> {
        let bind: SocketAddr = if server.is_ipv4() {
            ([127, 0, 0, 1], 0).into()
        } else {
            "[::1]:0".parse().unwrap()
        };
        Ok(Self {
            socket: UdpSocket::bind(bind)?,
            server,
            timeout,
            attempts: 3,
        })
    }

    pub fn server(&self) -> SocketAddr {
        self.server
    }

    fn call(&self, mut frame: Envelope, expect: MsgType) -> io::Result<Envelope> {
        frame.request_id = RequestId(rand::rng().random());
        let bytes = frame.encode().map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
        let mut buf = vec![0u8; 70_000];
        for _ in 0..self.attempts {
            self.socket.send_to(&bytes, self.server)?;
            self.socket.set_read_timeout(Some(self.timeout))?;
            loop {
                match self.socket.recv_from(&mut buf) {
                    Ok((n, from)) if from == self.server => {
                        if let Ok(reply) = Envelope::decode_slice(&buf[..n]) {
                            if reply.request_id == frame.request_id && reply.msg_type == expect {
                                return Ok(reply);
                            }
                        }
                    }
                    Ok(_) => {}
                    Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => break,
                    Err(e) if e.kind() == io::ErrorKind::ConnectionRefused => break,
                    Err(e) => return Err(e),
                }
            }
        }
        Err(io::Error::new(
            io::ErrorKind::TimedOut,
            format!("directory {} did not answer", self.server),
        ))
    }

    pub fn reflect(&self) -> io::Result<SocketAddr> {
        let reply = self.call(
            Envelope::control(MsgType::AddrReflect, ServiceId::default(), Bytes::new()),
            MsgType::AddrReply,
        )?;
        std::str::from_utf8(&reply.payload)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "malformed reflection reply"))
    }

    pub fn advertise(&self, service: ServiceId, peer: PeerGuid, addresses: Vec<SocketAddr>) -> io::Result<()> {
        let frame = Envelope::control(MsgType::Advertise, service, json(&AdvertisePayload { peer, addresses }));
        self.call(frame, MsgType::Advertise).map(drop)
    }

    /// Returns how many entries were refreshed; zero means the peer must
    /// advertise again.
    pub fn heartbeat(&self, peer: PeerGuid) -> io::Result<usize> {
        let frame = Envelope::control(MsgType::Heartbeat, ServiceId::default(), json(&HeartbeatPayload { peer }));
        let reply = self.call(frame, MsgType::Heartbeat)?;
        Ok(serde_json::from_slice::<Ack>(&reply.payload).map_or(0, |a| a.count))
    }

    pub fn lookup(&self, service: ServiceId, client: Option<PeerGuid>) -> io::Result<Vec<LookupRecord>> {
        let frame = Envelope::control(MsgType::Lookup, service, json(&LookupPayload { client }));
        let reply = self.call(frame, MsgType::LookupReply)?;
        serde_json::from_slice(&reply.payload).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    pub fn report_disconnect(&self, reporter: PeerGuid, connection: ConnectionId) -> io::Result<Ack> {
        let mut frame = Envelope::control(
            MsgType::DisconnectReport,
            ServiceId::default(),
            json(&DisconnectPayload { reporter }),
        );
        frame.connection_id = connection;
        let reply = self.call(frame, MsgType::DisconnectReport)?;
        serde_json::from_slice(&reply.payload).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }
}
