use std::fmt::Debug;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use bytes::Bytes;

use super::registry::{PendingRegistry, ResponseOutcome, Sinks, TimeoutOutcome};
use super::wire::{new_request_id, Envelope, MsgType, RequestId};
use super::ProxyError;
use crate::discovery::{ConnectionId, PeerGuid, ServiceId};

/// Sends an already-encoded frame to one endpoint. Implementations must not
/// block on a slow path; queue instead.
pub trait Transport: Send + Sync {
    type Endpoint: Clone + Debug + Send + 'static;

    fn transmit(&self, to: &Self::Endpoint, frame: Bytes) -> std::io::Result<()>;
}

/// Milliseconds on whatever clock drives deadlines.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct MonotonicClock {
    origin: Instant,
}

impl MonotonicClock {
    pub fn new() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MonotonicClock {
    fn now_ms(&self) -> f64 {
        self.origin.elapsed().as_secs_f64() * 1e3
    }
}

/// Clock that only moves when told to. Used by tests and the simulator.
#[derive(Debug, Default)]
pub struct ManualClock {
    bits: AtomicU64,
}

impl ManualClock {
    pub fn new(start_ms: f64) -> Self {
        Self {
            bits: AtomicU64::new(start_ms.to_bits()),
        }
    }

    pub fn set(&self, ms: f64) {
        self.bits.store(ms.to_bits(), Ordering::SeqCst);
    }

    pub fn advance(&self, ms: f64) {
        self.set(self.now_ms() + ms);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> f64 {
        f64::from_bits(self.bits.load(Ordering::SeqCst))
    }
}

impl<C: Clock + ?Sized> Clock for Arc<C> {
    fn now_ms(&self) -> f64 {
        (**self).now_ms()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Completion {
    Response(Bytes),
    TimedOut,
}

/// Receiving end of a request submitted with [`ReplicatingClient::submit_waiting`].
#[derive(Debug)]
pub struct PendingHandle {
    pub request_id: RequestId,
    rx: mpsc::Receiver<Completion>,
}

impl PendingHandle {
    pub fn wait(&self, limit: Duration) -> Option<Completion> {
        self.rx.recv_timeout(limit).ok()
    }

    pub fn try_get(&self) -> Option<Completion> {
        self.rx.try_recv().ok()
    }
}

/// Robot-side half of the proxy: stamps each request with a fresh id,
/// registers it, and fans the single encoded frame out to every endpoint.
pub struct ReplicatingClient<T: Transport, C: Clock = MonotonicClock> {
    guid: PeerGuid,
    sequence: AtomicU64,
    registry: Arc<PendingRegistry<T::Endpoint>>,
    transport: T,
    clock: C,
}

impl<T: Transport, C: Clock> ReplicatingClient<T, C> {
    pub fn new(guid: PeerGuid, transport: T, clock: C) -> Self {
        Self::with_registry(guid, transport, clock, Arc::new(PendingRegistry::new()))
    }

    pub fn with_registry(guid: PeerGuid, transport: T, clock: C, registry: Arc<PendingRegistry<T::Endpoint>>) -> Self {
        Self {
            guid,
            sequence: AtomicU64::new(0),
            registry,
            transport,
            clock,
        }
    }

    pub fn guid(&self) -> PeerGuid {
        self.guid
    }

    pub fn registry(&self) -> &Arc<PendingRegistry<T::Endpoint>> {
        &self.registry
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    pub fn clock(&self) -> &C {
        &self.clock
    }

    /// Replicates one request to every endpoint. The deadline is relative to
    /// the client clock; the frame is encoded once and shared.
    pub fn submit(
        &self,
        payload: Bytes,
        service: ServiceId,
        endpoints: &[T::Endpoint],
        deadline_ms: f64,
        sinks: Sinks,
    ) -> Result<RequestId, ProxyError> {
        if endpoints.is_empty() {
            return Err(ProxyError::NoEndpoints);
        }
        let seq = self.sequence.fetch_add(1, Ordering::Relaxed);
        let request_id = new_request_id(&self.guid, seq);
        let envelope = Envelope::new(
            MsgType::Request,
            ConnectionId::session(&self.guid, &service),
            request_id,
            service,
            payload,
        );
        let frame = envelope.encode()?;
        self.registry
            .register(request_id, self.clock.now_ms() + deadline_ms, endpoints.to_vec(), sinks)?;
        for endpoint in endpoints {
            if let Err(err) = self.transport.transmit(endpoint, frame.clone()) {
                log::debug!("transmit to {endpoint:?} failed: {err}");
            }
        }
        Ok(request_id)
    }

    /// Like [`submit`](Self::submit), with the outcome delivered on a channel.
    pub fn submit_waiting(
        &self,
        payload: Bytes,
        service: ServiceId,
        endpoints: &[T::Endpoint],
        deadline_ms: f64,
    ) -> Result<PendingHandle, ProxyError> {
        let (tx, rx) = mpsc::channel();
        let tx2 = tx.clone();
        let sinks = Sinks::new(
            move |payload| {
                let _ = tx.send(Completion::Response(payload));
            },
            move || {
                let _ = tx2.send(Completion::TimedOut);
            },
        );
        let request_id = self.submit(payload, service, endpoints, deadline_ms, sinks)?;
        Ok(PendingHandle { request_id, rx })
    }

    /// Routes an inbound frame. Only `RESPONSE` frames reach the registry.
    pub fn on_frame(&self, envelope: &Envelope) -> Option<ResponseOutcome> {
        (envelope.msg_type == MsgType::Response).then(|| self.on_response(envelope))
    }

    pub fn on_response(&self, envelope: &Envelope) -> ResponseOutcome {
        self.registry.on_response(envelope.request_id, envelope.payload.clone())
    }

    pub fn on_timeout(&self, id: RequestId) -> TimeoutOutcome {
        self.registry.on_timeout(id)
    }

    /// Fires every timer due on the client clock.
    pub fn expire_due(&self) -> usize {
        self.registry.expire_due(self.clock.now_ms())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use parking_lot::Mutex;

    #[derive(Default)]
    struct Recording {
        sent: Mutex<Vec<(usize, Bytes)>>,
    }

    impl Transport for Arc<Recording> {
        type Endpoint = usize;

        fn transmit(&self, to: &usize, frame: Bytes) -> std::io::Result<()> {
            self.sent.lock().push((*to, frame));
            Ok(())
        }
    }

    type Fixture = (
        ReplicatingClient<Arc<Recording>, Arc<ManualClock>>,
        Arc<Recording>,
        Arc<ManualClock>,
    );

    fn client() -> Fixture {
        let rec = Arc::new(Recording::default());
        let clock = Arc::new(ManualClock::new(0.0));
        (
            ReplicatingClient::new(PeerGuid::from_label("robot"), rec.clone(), clock.clone()),
            rec,
            clock,
        )
    }

    #[test]
    fn single_endpoint_behaves_like_plain_rpc() {
        let (c, rec, _) = client();
        let h = c
            .submit_waiting(Bytes::from_static(b"ping"), ServiceId::from_label("echo"), &[0], 50.0)
            .unwrap();
        let sent = rec.sent.lock().clone();
        assert_eq!(sent.len(), 1);
        let req = Envelope::decode(sent[0].1.clone()).unwrap();
        assert_eq!(req.request_id, h.request_id);
        assert_eq!(
            c.on_response(&req.response(Bytes::from_static(b"pong"))),
            ResponseOutcome::Delivered
        );
        assert_eq!(h.try_get(), Some(Completion::Response(Bytes::from_static(b"pong"))));
    }

    #[test]
    fn three_endpoints_share_one_frame() {
        let (c, rec, _) = client();
        c.submit(
            Bytes::from(vec![1u8; 4096]),
            ServiceId::from_label("s"),
            &[0, 1, 2],
            50.0,
            Sinks::noop(),
        )
        .unwrap();
        let sent = rec.sent.lock().clone();
        assert_eq!(sent.iter().map(|(e, _)| *e).collect::<Vec<_>>(), vec![0, 1, 2]);
        // One encoded buffer referenced three times: no per-endpoint copy.
        let ptr = sent[0].1.as_ptr();
        assert!(sent.iter().all(|(_, f)| f.as_ptr() == ptr));
        assert_eq!(c.registry().len(), 1);
    }

    #[test]
    fn no_endpoints_is_an_error() {
        let (c, _, _) = client();
        assert!(matches!(
            c.submit(Bytes::new(), ServiceId::default(), &[], 5.0, Sinks::noop()),
            Err(ProxyError::NoEndpoints)
        ));
        assert!(c.registry().is_empty());
    }

    #[test]
    fn deadline_is_relative_to_the_clock() {
        let (c, _, clock) = client();
        clock.set(100.0);
        let h = c.submit_waiting(Bytes::new(), ServiceId::default(), &[0], 20.0).unwrap();
        clock.set(119.0);
        assert_eq!(c.expire_due(), 0);
        clock.set(120.0);
        assert_eq!(c.expire_due(), 1);
        assert_eq!(h.try_get(), Some(Completion::TimedOut));
        assert!(c.registry().is_empty());
    }

    #[test]
    fn request_ids_follow_the_sequence() {
        let (c, _, _) = client();
        let a = c.submit(Bytes::new(), ServiceId::default(), &[0], 5.0, Sinks::noop()).unwrap();
        let b = c.submit(Bytes::new(), ServiceId::default(), &[0], 5.0, Sinks::noop()).unwrap();
        let guid = PeerGuid::from_label("robot");
        assert_eq!((a, b), (new_request_id(&guid, 0), new_request_id(&guid, 1)));
    }

    #[test]
    fn non_response_frames_are_ignored() {
        let (c, _, _) = client();
        let hb = Envelope::control(MsgType::Heartbeat, ServiceId::default(), Bytes::new());
        assert_eq!(c.on_frame(&hb), None);
    }
}
