//! In-flight request table on the client side.
//!
//! Every registered request ends in exactly one terminal state. The first
//! response moves it to `Completed`, the timer moves it to `TimedOut`, and
//! whichever comes first wins; the transition happens under the table lock,
//! and the matching sink runs after the lock is released.
//!
//! Terminal ids are remembered in a bounded tombstone list so that late
//! replica responses are classified as duplicates (or late arrivals after a
//! timeout) rather than as unknown traffic.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};

use bytes::Bytes;
use parking_lot::Mutex;
use serde::Serialize;

use super::wire::RequestId;

const DEFAULT_TOMBSTONES: usize = 1 << 16;

pub type ResponseSink = Box<dyn FnOnce(Bytes) + Send>;
pub type TimeoutSink = Box<dyn FnOnce() + Send>;

/// Callbacks attached to one pending request. Exactly one of them runs.
pub struct Sinks {
    pub on_response: ResponseSink,
    pub on_timeout: TimeoutSink,
}

impl Sinks {
    pub fn new(on_response: impl FnOnce(Bytes) + Send + 'static, on_timeout: impl FnOnce() + Send + 'static) -> Self {
        Self {
            on_response: Box::new(on_response),
            on_timeout: Box::new(on_timeout),
        }
    }

    pub fn noop() -> Self {
        Self::new(|_| {}, || {})
    }
}

impl std::fmt::Debug for Sinks {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Sinks")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestState {
    Pending,
    Completed,
    TimedOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseOutcome {
    Delivered,
    /// Another replica already answered.
    DroppedDuplicate,
    /// The request had already timed out.
    DroppedLate,
    DroppedUnknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeoutOutcome {
    TimedOut,
    /// A response won the race, or the id was never registered.
    AlreadyCompleted,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("request {0} is already registered")]
pub struct DuplicateRequestId(pub RequestId);

#[derive(Debug, Default)]
pub struct RegistryMetrics {
    pub registered: AtomicU64,
    pub delivered: AtomicU64,
    pub timed_out: AtomicU64,
    pub duplicates: AtomicU64,
    pub late: AtomicU64,
    pub unknown: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct MetricsSnapshot {
    pub registered: u64,
    pub delivered: u64,
    pub timed_out: u64,
    pub duplicates: u64,
    pub late: u64,
    pub unknown: u64,
}

impl RegistryMetrics {
    pub fn snapshot(&self) -> MetricsSnapshot {
        MetricsSnapshot {
            registered: self.registered.load(Ordering::Relaxed),
            delivered: self.delivered.load(Ordering::Relaxed),
            timed_out: self.timed_out.load(Ordering::Relaxed),
            duplicates: self.duplicates.load(Ordering::Relaxed),
            late: self.late.load(Ordering::Relaxed),
            unknown: self.unknown.load(Ordering::Relaxed),
        }
    }
}

#[derive(Debug)]
struct Entry<A> {
    deadline_ms: f64,
    sent_to: Vec<A>,
    sinks: Sinks,
}

#[derive(Debug)]
struct Inner<A> {
    live: HashMap<RequestId, Entry<A>>,
    terminal: HashMap<RequestId, RequestState>,
    terminal_order: VecDeque<RequestId>,
}

/// Pending-request table, safe for concurrent use from interface workers
/// and the timer source. `A` is the endpoint type requests were sent to.
#[derive(Debug)]
pub struct PendingRegistry<A = std::net::SocketAddr> {
    inner: Mutex<Inner<A>>,
    tombstones: usize,
    metrics: RegistryMetrics,
}

impl<A> Default for PendingRegistry<A> {
    fn default() -> Self {
        Self::new()
    }
}

impl<A> PendingRegistry<A> {
    pub fn new() -> Self {
        Self::with_tombstones(DEFAULT_TOMBSTONES)
    }

    /// `tombstones` bounds how many terminal ids are remembered for
    /// duplicate classification.
    pub fn with_tombstones(tombstones: usize) -> Self {
        Self {
            inner: Mutex::new(Inner {
                live: HashMap::new(),
                terminal: HashMap::new(),
                terminal_order: VecDeque::new(),
            }),
            tombstones,
            metrics: RegistryMetrics::default(),
        }
    }

    pub fn register(&self, id: RequestId, deadline_ms: f64, sent_to: Vec<A>, sinks: Sinks) -> Result<(), DuplicateRequestId> {
        let mut inner = self.inner.lock();
        if inner.live.contains_key(&id) || inner.terminal.contains_key(&id) {
            return Err(DuplicateRequestId(id));
        }
        inner.live.insert(
            id,
            Entry {
                deadline_ms,
                sent_to,
                sinks,
            },
        );
        self.metrics.registered.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }

    fn retire(&self, inner: &mut Inner<A>, id: RequestId, state: RequestState) {
        if self.tombstones == 0 {
            return;
        }
        inner.terminal.insert(id, state);
        inner.terminal_order.push_back(id);
        while inner.terminal_order.len() > self.tombstones {
            if let Some(old) = inner.terminal_order.pop_front() {
                inner.terminal.remove(&old);
            }
        }
    }

    /// Delivers the first response for `id`; later ones are dropped.
    pub fn on_response(&self, id: RequestId, payload: Bytes) -> ResponseOutcome {
        let entry = {
            let mut inner = self.inner.lock();
            match inner.live.remove(&id) {
                Some(entry) => {
                    self.retire(&mut inner, id, RequestState::Completed);
                    entry
                }
                None => {
                    let outcome = match inner.terminal.get(&id) {
                        Some(RequestState::TimedOut) => ResponseOutcome::DroppedLate,
                        Some(_) => ResponseOutcome::DroppedDuplicate,
                        None => ResponseOutcome::DroppedUnknown,
                    };
                    let counter = match outcome {
                        ResponseOutcome::DroppedLate => &self.metrics.late,
                        ResponseOutcome::DroppedDuplicate => &self.metrics.duplicates,
                        _ => &self.metrics.unknown,
                    };
                    counter.fetch_add(1, Ordering::Relaxed);
                    return outcome;
                }
            }
        };
        self.metrics.delivered.fetch_add(1, Ordering::Relaxed);
        (entry.sinks.on_response)(payload);
        ResponseOutcome::Delivered
    }

    pub fn on_timeout(&self, id: RequestId) -> TimeoutOutcome {
        let entry = {
            let mut inner = self.inner.lock();
            match inner.live.remove(&id) {
                Some(entry) => {
                    self.retire(&mut inner, id, RequestState::TimedOut);
                    entry
                }
                None => return TimeoutOutcome::AlreadyCompleted,
            }
        };
        self.metrics.timed_out.fetch_add(1, Ordering::Relaxed);
        (entry.sinks.on_timeout)();
        TimeoutOutcome::TimedOut
    }

    /// Fires the timeout for every pending request whose deadline is at or
    /// before `now_ms`. Returns how many timed out.
    pub fn expire_due(&self, now_ms: f64) -> usize {
        let due: Vec<RequestId> = {
            let inner = self.inner.lock();
            inner
                .live
                .iter()
                .filter(|(_, e)| e.deadline_ms <= now_ms)
                .map(|(id, _)| *id)
                .collect()
        };
        due.into_iter()
            .filter(|id| self.on_timeout(*id) == TimeoutOutcome::TimedOut)
            .count()
    }

    pub fn next_deadline(&self) -> Option<f64> {
        self.inner.lock().live.values().map(|e| e.deadline_ms).reduce(f64::min)
    }

    pub fn state(&self, id: &RequestId) -> Option<RequestState> {
        let inner = self.inner.lock();
        if inner.live.contains_key(id) {
            return Some(RequestState::Pending);
        }
        inner.terminal.get(id).copied()
    }

    pub fn sent_to(&self, id: &RequestId) -> Option<Vec<A>>
    where
        A: Clone,
    {
        self.inner.lock().live.get(id).map(|e| e.sent_to.clone())
    }

    /// Number of pending entries.
    pub fn len(&self) -> usize {
        self.inner.lock().live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn metrics(&self) -> MetricsSnapshot {
        self.metrics.snapshot()
    }
}
