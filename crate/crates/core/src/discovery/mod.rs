//! Connectivity control plane: address reflection, the service directory,
//! deterministic connection identifiers and gateway topologies. None of it
//! carries application payloads.

mod directory;
mod ids;
pub mod service;
mod topology;

pub use directory::{
    reflect, ConnectionRecord, Directory, DirectoryEntry, DisconnectAck, DEFAULT_HEARTBEAT_INTERVAL_MS, STALE_AFTER_INTERVALS,
};
pub use ids::{connection_id, ConnectionId, PeerGuid, ServiceId};
pub use service::{DirectoryClient, DirectoryServer, LookupRecord};
pub use topology::{NodeRole, TopologyError, TopologyTree};
