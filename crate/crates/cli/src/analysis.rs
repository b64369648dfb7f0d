use std::path::Path;
use std::time::Duration;

use replicast_core::matcher::{self, CostMatrix, Objective, PathSampleSet};
use replicast_core::reliability::{self, FailureModel, MissProbability};
use replicast_core::sim::{self, ScenarioConfig, Variant};
use serde::Serialize;

use crate::error::{self, CliError};

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig, CliError> {
    let mut cfg = ScenarioConfig::from_toml(&error::read(path)?)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map(|s| s + "\n").map_err(CliError::internal)
}

pub fn simulate(config: &Path, seed: Option<u64>, out: &Path) -> Result<(), CliError> {
    let cfg = load_scenario(config, seed)?;
    let output = sim::run(&cfg)?;
    error::create_dir(out)?;

    let mut trace = Vec::new();
    sim::write_trace_csv(&output.trace, &mut trace)?;
    error::write(&out.join("trace.csv"), trace)?;
    let mut events = Vec::new();
    sim::write_events_jsonl(&output.events, &mut events)?;
    error::write(&out.join("events.jsonl"), events)?;
    let summary = sim::RunSummary::from_trace(&output.trace);
    error::write(&out.join("summary.json"), to_json(&summary)?)?;

    println!(
        "{} requests, {} timed out ({:.3}%), {} events -> {}",
        summary.requests,
        summary.timeouts,
        100.0 * summary.timeout_fraction,
        output.events.len(),
        out.display()
    );
    Ok(())
}

pub fn compare(config: &Path, variants: &str, seed: Option<u64>, json: Option<&Path>) -> Result<(), CliError> {
    let cfg = load_scenario(config, seed)?;
    let variants = Variant::parse_list(variants)?;
    let reports = sim::compare(&cfg, &variants)?;
    print!("{}", sim::format_table(&reports));
    if let Some(path) = json {
        error::write(path, to_json(&reports)?)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct MatchOutput {
    objective_kind: Objective,
    /// `columns[i]`: server assigned to interface `i`.
    columns: Vec<usize>,
    matrix: Vec<Vec<u8>>,
    objective: f64,
    joint_miss: f64,
}

fn parse_capacities(list: &str) -> Result<Vec<u32>, CliError> {
    list.split(',')
        .map(|c| {
            c.trim()
                .parse::<u32>()
                .map_err(|e| CliError::user(format!("capacities: `{c}`: {e}")))
        })
        .collect()
}

fn read_cost_csv(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let text = error::read(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(j, v)| {
                v.parse::<f64>()
                    .map_err(|e| CliError::user(format!("{}: row {i} column {j}: `{v}`: {e}", path.display())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn matching(
    costs: Option<&Path>,
    samples: Option<&Path>,
    deadline: Option<f64>,
    mode: &str,
    capacities: Option<&str>,
) -> Result<(), CliError> {
    let objective: Objective = mode.parse().map_err(CliError::user)?;
    let capacities = capacities.map(parse_capacities).transpose()?;
    let matrix = match (costs, samples) {
        (Some(path), None) => CostMatrix::new(read_cost_csv(path)?, capacities).map_err(CliError::user)?,
        (None, Some(path)) => {
            let mut set: PathSampleSet =
                serde_json::from_str(&error::read(path)?).map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
            if let Some(d) = deadline {
                set.deadline_ms = d;
            }
            if capacities.is_some() {
                set.capacities = capacities;
            }
            matcher::estimate_costs(&set).map_err(CliError::user)?
        }
        _ => return Err(CliError::user("exactly one of --costs or --samples is required")),
    };
    let solution = matcher::solve(&matrix, objective).map_err(CliError::user)?;
    let out = MatchOutput {
        objective_kind: objective,
        columns: solution.assignment.columns().to_vec(),
        matrix: solution.assignment.matrix(),
        objective: solution.objective,
        joint_miss: matcher::joint_miss(&matrix, &solution.assignment),
    };
    print!("{}", to_json(&out)?);
    Ok(())
}

/// Bare numbers are seconds; otherwise `15h`, `20m`, `1h 30m` and so on.
fn parse_duration(field: &str, text: &str) -> Result<f64, CliError> {
    let text = text.trim();
    if let Ok(secs) = text.parse::<f64>() {
        return if secs >= 0.0 && secs.is_finite() {
            Ok(secs)
        } else {
            Err(CliError::user(format!("{field}: duration must be non-negative, got {text}")))
        };
    }
    humantime::parse_duration(text)
        .map(|d: Duration| d.as_secs_f64())
        .map_err(|e| CliError::user(format!("{field}: `{text}`: {e}")))
}

pub fn replicas(uptime: &str, recovery: &str, target: f64) -> Result<(), CliError> {
    let uptime = parse_duration("uptime", uptime)?;
    let recovery = parse_duration("recovery", recovery)?;
    if !(target > 0.0 && target < 1.0) {
        return Err(CliError::user(format!("target: must be in (0, 1), got {target}")));
    }
    let model = FailureModel::new(uptime, recovery).map_err(CliError::user)?;
    let p = reliability::vm_failure_probability(&model).map_err(CliError::user)?;
    // A replica that never goes down needs no partner.
    let n = if p.value() == 0.0 {
        1
    } else {
        let target = MissProbability::new(target).map_err(CliError::user)?;
        reliability::required_replicas(p, target).map_err(CliError::user)?
    };
    println!("p_vm={:.6}", p.value());
    for k in 1..=n {
        let p_sys = reliability::system_failure_probability(&vec![p; k as usize]);
        println!("p_sys({k})={:.6e}", p_sys.value());
    }
    println!("N={n}");
    Ok(())
}

#[derive(Debug, Serialize)]
struct ReportSummary {
    requests: usize,
    timeouts: usize,
    timeout_fraction: f64,
    latency: reliability::LatencySummary,
}

pub fn report(trace: &Path, out: &Path, bucket_ms: f64) -> Result<(), CliError> {
    let file = std::fs::File::open(trace).map_err(|e| CliError::user(format!("cannot read {}: {e}", trace.display())))?;
    let rows = sim::read_trace_csv(file)?;
    if rows.is_empty() {
        return Err(CliError::user(format!("{}: trace has no requests", trace.display())));
    }
    let mut latencies = Vec::with_capacity(rows.len());
    for row in &rows {
        if let Some(l) = row.latency()? {
            latencies.push(l);
        }
    }
    let buckets = sim::histogram(&latencies, bucket_ms)?;
    let cdf = sim::cdf_points(&buckets, rows.len());
    let summary = ReportSummary {
        requests: rows.len(),
        timeouts: rows.len() - latencies.len(),
        timeout_fraction: (rows.len() - latencies.len()) as f64 / rows.len() as f64,
        latency: reliability::summarize(&latencies).map_err(CliError::user)?,
    };

    error::create_dir(out)?;
    let mut hist = csv::Writer::from_writer(Vec::new());
    for b in &buckets {
        hist.serialize(b).map_err(CliError::internal)?;
    }
    error::write(&out.join("histogram.csv"), hist.into_inner().map_err(CliError::internal)?)?;
    let mut cdf_out = csv::Writer::from_writer(Vec::new());
    for p in &cdf {
        cdf_out.serialize(p).map_err(CliError::internal)?;
    }
    error::write(&out.join("cdf.csv"), cdf_out.into_inner().map_err(CliError::internal)?)?;
    error::write(&out.join("summary.json"), to_json(&summary)?)?;
    println!(
        "{} requests, p50={:.3} ms, p99={:.3} ms, {} buckets -> {}",
        summary.requests,
        summary.latency.p50,
        summary.latency.p99,
        buckets.len(),
        out.display()
    );
    Ok(())
}
