use std::sync::Arc;

use bytes::Bytes;
use parking_lot::Mutex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::wire::{Envelope, MsgType};
use crate::reliability::LatencyDistribution;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("service failed: {0}")]
pub struct ServiceError(pub String);

/// The application service behind a server proxy.
pub trait Service: Send + Sync {
    fn call(&self, request: &Bytes) -> Result<Bytes, ServiceError>;
}

impl<F> Service for F
where
    F: Fn(&Bytes) -> Result<Bytes, ServiceError> + Send + Sync,
{
    fn call(&self, request: &Bytes) -> Result<Bytes, ServiceError> {
        self(request)
    }
}

/// Returns the request payload unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct Echo;

impl Service for Echo {
    fn call(&self, request: &Bytes) -> Result<Bytes, ServiceError> {
        Ok(request.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Served {
    pub response: Envelope,
    /// Synthetic processing time to wait (or to add on the simulated clock)
    /// before the response leaves.
    pub compute_delay_ms: f64,
}

/// Cloud-side half of the proxy.
pub struct ServerProxy {
    service: Arc<dyn Service>,
    compute_model: Option<LatencyDistribution>,
    rng: Mutex<ChaCha8Rng>,
}

impl ServerProxy {
    pub fn new(service: Arc<dyn Service>) -> Self {
        Self {
            service,
            compute_model: None,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(0)),
        }
    }

    pub fn with_compute_model(mut self, model: LatencyDistribution, seed: u64) -> Self {
        self.compute_model = Some(model);
        self.rng = Mutex::new(ChaCha8Rng::seed_from_u64(seed));
        self
    }

    /// Runs the service for a `REQUEST` frame. Anything else, or a failing
    /// service, produces no response: clients recover through other
    /// replicas or their own timeout.
    pub fn serve(&self, request: &Envelope) -> Option<Served> {
        if request.msg_type != MsgType::Request {
            return None;
        }
        let compute_delay_ms = self.compute_model.as_ref().map_or(0.0, |model| model.sample(&mut *self.rng.lock()));
        match self.service.call(&request.payload) {
            Ok(payload) => Some(Served {
                response: request.response(payload),
                compute_delay_ms,
            }),
            Err(err) => {
                log::debug!("request {} dropped: {err}", request.request_id);
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::{ConnectionId, ServiceId};
    use crate::proxy::wire::RequestId;

    fn request(payload: &'static [u8]) -> Envelope {
        Envelope::new(
            MsgType::Request,
            ConnectionId([1; 32]),
            RequestId([2; 16]),
            ServiceId([3; 32]),
            Bytes::from_static(payload),
        )
    }

    #[test]
    fn echo_preserves_identity_and_payload() {
        let server = ServerProxy::new(Arc::new(Echo));
        let req = request(b"hello");
        let served = server.serve(&req).unwrap();
        assert_eq!(served.response.msg_type, MsgType::Response);
        assert_eq!(served.response.request_id, req.request_id);
        assert_eq!(served.response.connection_id, req.connection_id);
        assert_eq!(served.response.service_id, req.service_id);
        assert_eq!(served.response.payload, req.payload);
        assert_eq!(served.compute_delay_ms, 0.0);
    }

    #[test]
    fn failing_service_emits_nothing() {
        let failing = |_: &Bytes| -> Result<Bytes, ServiceError> { Err(ServiceError("boom".into())) };
        let server = ServerProxy::new(Arc::new(failing));
        assert!(server.serve(&request(b"x")).is_none());
    }

    #[test]
    fn only_requests_are_served() {
        let server = ServerProxy::new(Arc::new(Echo));
        let mut env = request(b"x");
        env.msg_type = MsgType::Heartbeat;
        assert!(server.serve(&env).is_none());
    }

    #[test]
    fn compute_model_sets_delay() {
        let server = ServerProxy::new(Arc::new(Echo)).with_compute_model(LatencyDistribution::constant(10.0), 1);
        assert_eq!(server.serve(&request(b"x")).unwrap().compute_delay_ms, 10.0);
    }
}
