use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{EventLogEntry, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathStatus {
    /// Answered before the deadline (the winner or a duplicate).
    Responded,
    /// Answered after the deadline.
    Late,
    /// Dropped by an outage or a preempted server.
    Lost,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathOutcome {
    pub path: usize,
    pub status: PathStatus,
    /// Send-to-receive time; `None` for lost paths.
    pub latency_ms: Option<f64>,
}

/// One request's fate. `latency_ms` is `None` exactly when no path
/// answered by the deadline; otherwise it is the winner's latency, the
/// minimum over responded paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub request: u64,
    pub send_ms: f64,
    pub outcomes: Vec<PathOutcome>,
    pub winner: Option<usize>,
    pub latency_ms: Option<f64>,
    pub egress_bytes: u64,
    /// Serving replicas (within the variant) at send time.
    pub active_replicas: usize,
}

impl TraceRecord {
    pub fn timed_out(&self) -> bool {
        self.latency_ms.is_none()
    }

    /// Earliest answer on any path, deadline ignored.
    pub fn first_answer_ms(&self) -> Option<f64> {
        self.outcomes.iter().filter_map(|o| o.latency_ms).reduce(f64::min)
    }
}

/// Flat CSV form of a [`TraceRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub request: u64,
    pub send_ms: String,
    /// Empty on timeout.
    pub latency_ms: String,
    pub timed_out: bool,
    pub winner_path: String,
    pub active_replicas: usize,
    pub egress_bytes: u64,
    /// `path=latency`, `path=late:latency` or `path=lost`, `;`-separated.
    pub paths: String,
}

fn ms(v: f64) -> String {
    format!("{v:.3}")
}

impl From<&TraceRecord> for TraceRow {
    fn from(r: &TraceRecord) -> Self {
        let paths: Vec<String> = r
            .outcomes
            .iter()
            .map(|o| match (o.status, o.latency_ms) {
                (PathStatus::Responded, Some(l)) => format!("{}={}", o.path, ms(l)),
                (PathStatus::Late, Some(l)) => format!("{}=late:{}", o.path, ms(l)),
                _ => format!("{}=lost", o.path),
            })
            .collect();
        Self {
            request: r.request,
            send_ms: ms(r.send_ms),
            latency_ms: r.latency_ms.map(ms).unwrap_or_default(),
            timed_out: r.timed_out(),
            winner_path: r.winner.map(|w| w.to_string()).unwrap_or_default(),
            active_replicas: r.active_replicas,
            egress_bytes: r.egress_bytes,
            paths: paths.join(";"),
        }
    }
}

impl TraceRow {
    pub fn latency(&self) -> Result<Option<f64>, SimError> {
        if self.latency_ms.is_empty() {
            return Ok(None);
        }
        self.latency_ms
            .parse()
            .map(Some)
            .map_err(|_| SimError::Trace(format!("request {}: bad latency_ms `{}`", self.request, self.latency_ms)))
    }
}

pub fn write_trace_csv<W: Write>(trace: &[TraceRecord], out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    for r in trace {
        w.serialize(TraceRow::from(r)).map_err(|e| SimError::Trace(e.to_string()))?;
    }
    w.flush().map_err(|e| SimError::Trace(e.to_string()))
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceRow>, SimError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .collect::<Result<Vec<TraceRow>, _>>()
        .map_err(|e| SimError::Trace(e.to_string()))
}

pub fn write_events_jsonl<W: Write>(events: &[EventLogEntry], mut out: W) -> Result<(), SimError> {
    for e in events {
        let line = serde_json::to_string(e).map_err(|e| SimError::Trace(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| SimError::Trace(e.to_string()))?;
    }
    Ok(())
}
