use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;

use bytes::Bytes;
use serde::{Deserialize, Serialize};

use super::ids::{ConnectionId, PeerGuid, ServiceId};
use crate::proxy::{Envelope, MsgType};

pub const DEFAULT_HEARTBEAT_INTERVAL_MS: f64 = 1000.0;
/// Entries are stale after this many missed heartbeat intervals.
pub const STALE_AFTER_INTERVALS: f64 = 3.0;

/// One peer's advertisement of a service at a set of reflected addresses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectoryEntry {
    pub service_id: ServiceId,
    pub peer: PeerGuid,
    pub addresses: Vec<SocketAddr>,
    pub last_heartbeat_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectionRecord {
    pub a: PeerGuid,
    pub b: PeerGuid,
    pub service: ServiceId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DisconnectAck {
    /// Whether the connection id was known and the reporter a party to it.
    pub known: bool,
    pub purged: usize,
}

/// In-memory service directory. Holds addresses and liveness only; nothing
/// survives a restart, peers re-advertise instead.
#[derive(Debug, Clone)]
pub struct Directory {
    ttl_ms: f64,
    entries: BTreeMap<(ServiceId, PeerGuid), DirectoryEntry>,
    connections: HashMap<ConnectionId, ConnectionRecord>,
}

impl Default for Directory {
    fn default() -> Self {
        Self::new(DEFAULT_HEARTBEAT_INTERVAL_MS * STALE_AFTER_INTERVALS)
    }
}

impl Directory {
    pub fn new(ttl_ms: f64) -> Self {
        Self {
            ttl_ms,
            entries: BTreeMap::new(),
            connections: HashMap::new(),
        }
    }

    pub fn with_heartbeat_interval(interval_ms: f64) -> Self {
        Self::new(interval_ms * STALE_AFTER_INTERVALS)
    }

    pub fn ttl_ms(&self) -> f64 {
        self.ttl_ms
    }

    fn is_fresh(&self, entry: &DirectoryEntry, now_ms: f64) -> bool {
        now_ms - entry.last_heartbeat_ms <= self.ttl_ms
    }

    /// Inserts or replaces the entry for `(service, peer)`.
    pub fn advertise(&mut self, entry: DirectoryEntry) {
        self.entries.insert((entry.service_id, entry.peer), entry);
    }

    /// Refreshes every entry of `peer`. Returns how many were refreshed.
    pub fn heartbeat(&mut self, peer: &PeerGuid, now_ms: f64) -> usize {
        let mut refreshed = 0;
        for entry in self.entries.values_mut().filter(|e| e.peer == *peer) {
            entry.last_heartbeat_ms = entry.last_heartbeat_ms.max(now_ms);
            refreshed += 1;
        }
        refreshed
    }

    /// Non-stale entries for `service`, ordered by peer.
    pub fn lookup(&self, service: &ServiceId, now_ms: f64) -> Vec<DirectoryEntry> {
        self.entries
            .range((*service, PeerGuid::from_bytes([0; 32]))..=(*service, PeerGuid::from_bytes([0xff; 32])))
            .map(|(_, e)| e)
            .filter(|e| self.is_fresh(e, now_ms))
            .cloned()
            .collect()
    }

    /// Drops stale entries, returning them.
    pub fn evict(&mut self, now_ms: f64) -> Vec<DirectoryEntry> {
        let ttl = self.ttl_ms;
        let stale: Vec<_> = self
            .entries
            .iter()
            .filter(|(_, e)| now_ms - e.last_heartbeat_ms > ttl)
            .map(|(k, _)| *k)
            .collect();
        stale.into_iter().filter_map(|k| self.entries.remove(&k)).collect()
    }

    /// Records the logical connection between `a` and `b` for `service`.
    pub fn register_connection(&mut self, a: PeerGuid, b: PeerGuid, service: ServiceId) -> ConnectionId {
        let id = ConnectionId::derive(&a, &b, &service);
        self.connections.insert(id, ConnectionRecord { a, b, service });
        id
    }

    pub fn connection(&self, id: &ConnectionId) -> Option<ConnectionRecord> {
        self.connections.get(id).copied()
    }

    /// `reporter` says its peer on `id` is gone: purge every entry of that
    /// peer and forget the connection. Unknown ids and non-party reporters
    /// are ignored.
    pub fn report_disconnect(&mut self, reporter: &PeerGuid, id: &ConnectionId) -> DisconnectAck {
        let Some(record) = self.connections.get(id).copied() else {
            return DisconnectAck::default();
        };
        let dead = if record.a == *reporter {
            record.b
        } else if record.b == *reporter {
            record.a
        } else {
            return DisconnectAck::default();
        };
        let before = self.entries.len();
        self.entries.retain(|_, e| e.peer != dead);
        self.connections.retain(|_, c| c.a != dead && c.b != dead);
        DisconnectAck {
            known: true,
            purged: before - self.entries.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Address-reflection reply: the payload is the observed source address of
/// the probe, as text.
pub fn reflect(probe: &Envelope, observed: SocketAddr) -> Envelope {
    Envelope {
        msg_type: MsgType::AddrReply,
        payload: Bytes::from(observed.to_string()),
        ..probe.clone()
    }
}
