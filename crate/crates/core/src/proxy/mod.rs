//! The replicating proxy: frame codec, robot-side replication with
//! first-response delivery, server-side service invocation, and the UDP
//! transport that binds one worker per network interface.

mod client;
pub mod net;
mod registry;
mod server;
pub mod wire;

pub use client::{Clock, Completion, ManualClock, MonotonicClock, PendingHandle, ReplicatingClient, Transport};
pub use net::UdpClient;
pub use registry::{
    DuplicateRequestId, MetricsSnapshot, PendingRegistry, RequestState, ResponseOutcome, ResponseSink, Sinks, TimeoutOutcome, TimeoutSink,
};
pub use server::{Echo, Served, ServerProxy, Service, ServiceError};
pub use wire::{new_request_id, Envelope, Flags, MsgType, RequestId, WireError};

#[derive(Debug, thiserror::Error)]
pub enum ProxyError {
    #[error("request has no endpoints")]
    NoEndpoints,
    #[error(transparent)]
    DuplicateRequestId(#[from] DuplicateRequestId),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("no interface could be brought up")]
    AllInterfacesFailed,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
