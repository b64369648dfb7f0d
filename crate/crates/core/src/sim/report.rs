use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBucket {
    pub lower_ms: f64,
    pub upper_ms: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub latency_ms: f64,
    pub fraction: f64,
}

/// Fixed-width buckets `[k*w, (k+1)*w)` from the bucket holding the
/// minimum to the one holding the maximum, empty buckets included.
pub fn histogram(samples: &[f64], width_ms: f64) -> Result<Vec<HistogramBucket>, SimError> {
    if samples.is_empty() {
        return Err(SimError::Trace("no latencies to bucket".into()));
    }
    if !(width_ms > 0.0) {
        return Err(SimError::Trace("bucket width must be positive".into()));
    }
    let index = |v: f64| (v / width_ms).floor() as i64;
    let lo = samples.iter().copied().map(index).min().expect("non-empty");
    let hi = samples.iter().copied().map(index).max().expect("non-empty");
    let mut counts = vec![0usize; (hi - lo + 1) as usize];
    for &s in samples {
        counts[(index(s) - lo) as usize] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| {
            let b = lo + k as i64;
            HistogramBucket {
                lower_ms: b as f64 * width_ms,
                upper_ms: (b + 1) as f64 * width_ms,
                count,
            }
        })
        .collect())
}

/// Empirical CDF at each bucket's upper edge, over `total` requests so that
/// timeouts keep the curve below 1.
pub fn cdf_points(buckets: &[HistogramBucket], total: usize) -> Vec<CdfPoint> {
    let mut seen = 0;
    buckets
        .iter()
        .map(|b| {
            seen += b.count;
            CdfPoint {
                latency_ms: b.upper_ms,
                fraction: seen as f64 / total.max(1) as f64,
            }
        })
        .collect()
}
