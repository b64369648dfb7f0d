//! End-to-end acceptance checks. Each test prints one verdict line to the
//! real stdout, so the lines survive libtest output capture.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use bytes::Bytes;
use parking_lot::Mutex;
use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use replicast_core::discovery::{ConnectionId, PeerGuid, ServiceId};
use replicast_core::matcher::{self, CostMatrix, Objective};
use replicast_core::proxy::wire::{HEADER_LEN, MAGIC, MAX_PAYLOAD, VERSION};
use replicast_core::proxy::{Envelope, Flags, ManualClock, MsgType, ReplicatingClient, RequestId, Sinks, Transport, WireError};
use replicast_core::reliability::{self, min_latency_cdf, FailureModel, LatencyDistribution};
use replicast_core::sim::{self, ScenarioConfig, SimEvent, TopologyConfig, Variant};

fn verdict(n: u32, name: &str, pass: bool, detail: impl AsRef<str>) {
    let line = format!(
        "acceptance {n:>2} {} {name}: {}\n",
        if pass { "PASS" } else { "FAIL" },
        detail.as_ref()
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(pass, "{}", line.trim_end());
}

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn scenario(rel: &str) -> ScenarioConfig {
    ScenarioConfig::from_toml(&fs::read_to_string(repo(rel)).unwrap()).unwrap()
}

#[test]
fn criterion_01_two_replica_failure_probability() {
    let started = Instant::now();
    let model = FailureModel::new(15.0 * 3600.0, 20.0 * 60.0).unwrap();
    let p = reliability::vm_failure_probability(&model).unwrap();
    let p_sys = reliability::system_failure_probability(&[p, p]).value();
    // Oracle: 1200 / 55200 = 1/46, squared is 1/2116.
    let oracle = 1.0 / 2116.0;
    let shown = format!("{p_sys:.3e}");
    let elapsed = started.elapsed();
    let pass = shown == "4.726e-4" && (p_sys - oracle).abs() < 1e-15 && p_sys < 5e-4 && elapsed < Duration::from_secs(1);
    verdict(
        1,
        "two-replica failure probability",
        pass,
        format!("p_sys={shown} (oracle {oracle:.6e}), below 0.05%: {}, {elapsed:?}", p_sys < 5e-4),
    );
}

/// Brute force over every feasible assignment, cheapest first, ties to the
/// lexicographically smallest flattened 0/1 matrix.
fn brute_force(eps: &[Vec<f64>], caps: &[u32], objective: Objective) -> (f64, Vec<usize>) {
    let (m, n) = (eps.len(), eps[0].len());
    let cost = |e: f64| match objective {
        Objective::Sum => e,
        Objective::LogProduct => e.max(matcher::LOG_FLOOR).ln(),
    };
    let flat = |cols: &[usize]| -> Vec<u8> { cols.iter().flat_map(|&c| (0..n).map(move |j| u8::from(j == c))).collect() };
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut cols = vec![0usize; m];
    loop {
        let mut used = vec![0u32; n];
        cols.iter().for_each(|&c| used[c] += 1);
        if used.iter().zip(caps).all(|(u, c)| u <= c) {
            let value = cols.iter().enumerate().fold(0.0, |acc, (i, &j)| acc + cost(eps[i][j]));
            let better = match &best {
                None => true,
                Some((b, bc)) => value < *b || (value == *b && flat(&cols) < flat(bc)),
            };
            if better {
                best = Some((value, cols.clone()));
            }
        }
        // Odometer increment over n^m column vectors.
        let mut i = m;
        loop {
            if i == 0 {
                return best.expect("instance is feasible");
            }
            i -= 1;
            cols[i] += 1;
            if cols[i] < n {
                break;
            }
            cols[i] = 0;
        }
    }
}

#[test]
fn criterion_02_matcher_equals_brute_force() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = Vec::new();
    for instance in 0..500 {
        let (mut m, mut n) = (rng.random_range(1..=7usize), rng.random_range(1..=7usize));
        let explicit_caps = instance % 3 == 0;
        if !explicit_caps && m > n {
            // Default capacity is one interface per server.
            std::mem::swap(&mut m, &mut n);
        }
        // Coarse values make exact ties common.
        let coarse = instance % 2 == 0;
        let eps: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        if coarse {
                            f64::from(rng.random_range(0..=10u8)) / 10.0
                        } else {
                            rng.random::<f64>()
                        }
                    })
                    .collect()
            })
            .collect();
        let capacities = if explicit_caps {
            let mut caps: Vec<u32> = (0..n).map(|_| rng.random_range(0..=2u32)).collect();
            while caps.iter().sum::<u32>() < m as u32 {
                let j = rng.random_range(0..n);
                caps[j] += 1;
            }
            Some(caps)
        } else {
            None
        };
        let objective = if instance % 4 < 2 { Objective::Sum } else { Objective::LogProduct };
        let costs = CostMatrix::new(eps.clone(), capacities.clone()).unwrap();
        let solved = matcher::solve(&costs, objective).unwrap();
        let (value, cols) = brute_force(&eps, capacities.as_deref().unwrap_or(&vec![1; n]), objective);
        if solved.objective != value || solved.assignment.columns() != cols.as_slice() {
            mismatches.push(instance);
        }
    }
    let elapsed = started.elapsed();
    let pass = mismatches.is_empty() && elapsed < Duration::from_secs(10);
    verdict(
        2,
        "matcher equals brute force",
        pass,
        format!("500 instances, {} mismatches {mismatches:?}, {elapsed:?}", mismatches.len()),
    );
}

#[derive(Clone, Default)]
struct Recorder {
    frames: Arc<Mutex<Vec<(usize, Bytes)>>>,
}

impl Transport for Recorder {
    type Endpoint = usize;

    fn transmit(&self, to: &usize, frame: Bytes) -> std::io::Result<()> {
        self.frames.lock().push((*to, frame));
        Ok(())
    }
}

#[test]
fn criterion_03_exactly_once_delivery() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let per_count = 2000usize;
    let total = per_count * 5;
    let mut violations = 0usize;
    let mut leaks = 0usize;
    let mut counted = 0u64;

    for replicas in 1..=5usize {
        let clock = Arc::new(ManualClock::new(0.0));
        let transport = Recorder::default();
        let client = Arc::new(ReplicatingClient::new(
            PeerGuid::from_label("robot"),
            transport.clone(),
            clock.clone(),
        ));
        let callbacks: Arc<Vec<AtomicU32>> = Arc::new((0..per_count).map(|_| AtomicU32::new(0)).collect());
        let endpoints: Vec<usize> = (0..replicas).collect();
        let mut ids = Vec::with_capacity(per_count);
        // Events: (time, kind, request, copy). Kind 0 response, 1 explicit timeout.
        let mut events: Vec<(f64, u8, usize, usize)> = Vec::new();
        for r in 0..per_count {
            let deadline = rng.random_range(1.0..100.0);
            let (a, b) = (callbacks.clone(), callbacks.clone());
            let sinks = Sinks::new(
                move |_| {
                    a[r].fetch_add(1, Ordering::SeqCst);
                },
                move || {
                    b[r].fetch_add(1, Ordering::SeqCst);
                },
            );
            let sent_at = clock.now_ms_value();
            ids.push(
                client
                    .submit(
                        Bytes::from(vec![r as u8; 8]),
                        ServiceId::from_label("svc"),
                        &endpoints,
                        deadline,
                        sinks,
                    )
                    .unwrap(),
            );
            for copy in 0..replicas {
                match rng.random_range(0..10) {
                    // Lost.
                    0..=1 => {}
                    // Duplicated by the network.
                    2 => {
                        let t = sent_at + rng.random_range(0.0..150.0);
                        events.push((t, 0, r, copy));
                        events.push((t + rng.random_range(0.0..5.0), 0, r, copy));
                    }
                    _ => events.push((sent_at + rng.random_range(0.0..150.0), 0, r, copy)),
                }
            }
            // A timer that fires exactly at the deadline races any response at that instant.
            if rng.random_bool(0.2) {
                events.push((sent_at + deadline, 1, r, 0));
                events.push((sent_at + deadline, 0, r, 0));
            }
            clock.advance(rng.random_range(0.0..2.0));
        }
        let frames = transport.frames.lock().clone();
        let request_envelopes: Vec<Envelope> = frames
            .iter()
            .step_by(replicas)
            .map(|(_, f)| Envelope::decode(f.clone()).unwrap())
            .collect();
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Shuffle events that share a timestamp.
        let mut i = 0;
        while i < events.len() {
            let mut j = i + 1;
            while j < events.len() && events[j].0 == events[i].0 {
                j += 1;
            }
            for k in (i + 1..j).rev() {
                let s = rng.random_range(i..=k);
                events.swap(k, s);
            }
            i = j;
        }
        // Half the events run in order on this thread with the clock and
        // timers; the rest race from four threads with explicit timeouts.
        let split = events.len() / 2;
        for &(t, kind, r, copy) in &events[..split] {
            if t > clock.now_ms_value() {
                clock.set(t);
            }
            client.expire_due();
            match kind {
                0 => {
                    let reply = request_envelopes[r].response(Bytes::from(format!("{copy}")));
                    client.on_frame(&reply);
                }
                _ => {
                    client.on_timeout(ids[r]);
                }
            }
        }
        let rest: Vec<_> = events[split..].to_vec();
        let chunks: Vec<Vec<_>> = rest.chunks(rest.len().div_ceil(4).max(1)).map(|c| c.to_vec()).collect();
        std::thread::scope(|s| {
            for chunk in &chunks {
                let client = client.clone();
                let envs = &request_envelopes;
                let ids = &ids;
                s.spawn(move || {
                    for &(_, kind, r, copy) in chunk {
                        if kind == 0 {
                            client.on_frame(&envs[r].response(Bytes::from(format!("{copy}"))));
                        } else {
                            client.on_timeout(ids[r]);
                        }
                    }
                });
            }
            s.spawn(|| {
                for _ in 0..200 {
                    client.expire_due();
                    std::thread::yield_now();
                }
            });
        });
        clock.set(f64::MAX / 2.0);
        client.expire_due();
        violations += callbacks.iter().filter(|c| c.load(Ordering::SeqCst) != 1).count();
        leaks += client.registry().len();
        let m = client.registry().metrics();
        counted += m.delivered + m.timed_out;
    }
    let elapsed = started.elapsed();
    let pass = violations == 0 && leaks == 0 && counted == total as u64 && elapsed < Duration::from_secs(30);
    verdict(
        3,
        "exactly-once delivery",
        pass,
        format!("{total} requests over 1-5 replicas, {violations} callback violations, {leaks} leaked entries, {counted} terminal outcomes, {elapsed:?}"),
    );
}

trait ClockValue {
    fn now_ms_value(&self) -> f64;
}

impl ClockValue for Arc<ManualClock> {
    fn now_ms_value(&self) -> f64 {
        use replicast_core::proxy::Clock;
        self.now_ms()
    }
}

const Z90: f64 = 1.2815515655446004;

fn lsc_config(k: usize, mu: f64, sigma: f64, requests: usize) -> ScenarioConfig {
    let deadline = (mu + sigma * Z90).exp();
    let mut text = format!(
        "seed = 41\nduration_ms = {requests}\ndeadline_ms = {deadline}\nschedule = {{ kind = \"interval\", interval_ms = 1.0 }}\n[[interfaces]]\nname = \"wifi\"\n"
    );
    for j in 0..k {
        text.push_str(&format!(
            "[[servers]]\nname = \"s{j}\"\nkind = \"on_demand\"\nregion = \"r{j}\"\n[[paths]]\ninterface = \"wifi\"\nserver = \"s{j}\"\nlatency = {{ kind = \"lognormal\", mu = {mu}, sigma = {sigma} }}\n"
        ));
    }
    ScenarioConfig::from_toml(&text).unwrap()
}

fn ks_distance(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn criterion_04_lsc_product_law() {
    let started = Instant::now();
    let (mu, sigma, n) = (3.0, 0.5, 100_000usize);
    let eps = 0.1f64;
    let mut details = Vec::new();
    let mut pass = true;
    for k in 1..=3usize {
        let cfg = lsc_config(k, mu, sigma, n);
        let out = sim::run(&cfg).unwrap();
        let requests = out.trace.len();
        let timeouts = out.trace.iter().filter(|r| r.timed_out()).count();
        let expected = eps.powi(k as i32);
        let se = (expected * (1.0 - expected) / requests as f64).sqrt();
        let observed = timeouts as f64 / requests as f64;
        let within = (observed - expected).abs() <= 3.0 * se;
        let mut first: Vec<f64> = out.trace.iter().filter_map(|r| r.first_answer_ms()).collect();
        let paths = vec![LatencyDistribution::lognormal(mu, sigma); k];
        let d = ks_distance(&mut first, |t| min_latency_cdf(&paths, t).unwrap());
        pass &= requests == n && within && d <= 0.02 && first.len() == n;
        details.push(format!("k={k}: {observed:.5} vs {expected:.3}±{:.5} KS={d:.4}", 3.0 * se));
    }
    let elapsed = started.elapsed();
    pass &= elapsed < Duration::from_secs(60);
    verdict(4, "LSC product law", pass, format!("{}, {elapsed:?}", details.join("; ")));
}

#[test]
fn criterion_05_zero_downtime_at_faults() {
    let cfg = scenario("scenarios/kill_recover_kill.toml");
    let out = sim::run(&cfg).unwrap();
    let recovery_ms = 1200.0 * cfg.time_scale * 1000.0;
    let covered: Vec<_> = out.trace.iter().filter(|r| r.active_replicas >= 1).collect();
    let timeouts = covered.iter().filter(|r| r.timed_out()).count();

    let mut preempted: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut advertised: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for e in &out.events {
        match &e.event {
            SimEvent::Preempted { server } => preempted.entry(server.clone()).or_default().push(e.t_ms),
            SimEvent::Fleet {
                server,
                action: replicast_core::fleet::FleetAction::Advertise { .. },
            } => advertised.entry(server.clone()).or_default().push(e.t_ms),
            _ => {}
        }
    }
    let mut recovered = true;
    let mut gaps = Vec::new();
    for (server, times) in &preempted {
        for &t in times {
            let back = advertised.get(server).and_then(|a| a.iter().copied().find(|&x| x >= t));
            match back {
                Some(b) if b - t <= recovery_ms + 1e-9 => gaps.push(format!("{server} {:.0} ms", b - t)),
                _ => recovered = false,
            }
            // Every request sent once the replica is back sees two replicas
            // until the next scripted preemption.
            let next_loss = preempted
                .values()
                .flatten()
                .copied()
                .filter(|&x| x > t)
                .fold(f64::INFINITY, f64::min);
            recovered &= out
                .trace
                .iter()
                .filter(|r| r.send_ms >= t + recovery_ms && r.send_ms < next_loss)
                .all(|r| r.active_replicas == 2);
        }
    }
    let pass = preempted.values().map(Vec::len).sum::<usize>() == 2
        && timeouts == 0
        && covered.len() == out.trace.len()
        && recovered
        && cfg.duration_ms <= 30_000.0;
    verdict(
        5,
        "zero downtime at faults",
        pass,
        format!(
            "{} requests, {timeouts} timeouts with >=1 replica, back to 2 after: [{}]",
            out.trace.len(),
            gaps.join(", ")
        ),
    );
}

#[test]
fn criterion_06_tail_latency_improvement() {
    let started = Instant::now();
    let base = scenario("scenarios/reference_slowdown.toml");
    let variants = Variant::parse_list("single:s1,single:s2,replicated").unwrap();
    let factor_vs_slowed = |reports: &[sim::VariantReport]| {
        reports[2]
            .improvements
            .iter()
            .find(|i| i.baseline == "single:s1")
            .map(|i| i.p99_factor)
            .unwrap_or(0.0)
    };
    let mean_ok = |reports: &[sim::VariantReport]| {
        let rep = reports[2].summary.latency.unwrap().mean;
        rep <= reports[0]
            .summary
            .latency
            .unwrap()
            .mean
            .min(reports[1].summary.latency.unwrap().mean)
    };
    let pinned = sim::compare(&base, &variants).unwrap();
    let pinned_factor = factor_vs_slowed(&pinned);
    let mut worst = f64::INFINITY;
    let mut means_ok = mean_ok(&pinned);
    for seed in 1..=20u64 {
        let mut cfg = base.clone();
        cfg.seed = seed;
        let reports = sim::compare(&cfg, &variants).unwrap();
        worst = worst.min(factor_vs_slowed(&reports));
        means_ok &= mean_ok(&reports);
    }
    let elapsed = started.elapsed();
    let pass = pinned_factor >= 2.0 && worst >= 1.5 && means_ok && elapsed < Duration::from_secs(60);
    verdict(
        6,
        "tail latency improvement",
        pass,
        format!(
            "P99 factor {pinned_factor:.2} at seed {}, min {worst:.2} over 20 seeds, mean dominance {means_ok}, {elapsed:?}",
            base.seed
        ),
    );
}

#[test]
fn criterion_07_resilient_identity() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    let cfg = repo("scenarios/demo.toml");
    let out = Command::new(env!("CARGO_BIN_EXE_replicast"))
        .args([
            "demo",
            "--config",
            cfg.to_str().unwrap(),
            "--requests",
            "300",
            "--run-dir",
            run_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    let ok_exit = out.status.success();
    let mut rows = Vec::new();
    if let Ok(mut reader) = csv::Reader::from_path(run_dir.join("requests.csv")) {
        for r in reader.records() {
            let r = r.unwrap();
            rows.push((
                r[0].parse::<usize>().unwrap(),
                r[3].parse::<bool>().unwrap(),
                r[4].to_string(),
                r[5].parse::<usize>().unwrap(),
            ));
        }
    }
    let failures = rows.iter().filter(|r| r.1).count();
    let after_directory_kill = rows.iter().filter(|r| r.0 >= 200 && r.1).count();

    let victim = PeerGuid::from_label("echo/replica-0").to_hex();
    let robot = PeerGuid::from_label("robot");
    let connections: serde_json::Value = fs::read_to_string(run_dir.join("connections.json"))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or_default();
    let ids = connections[&victim]["connection_ids"].as_array().cloned().unwrap_or_default();
    let addresses = connections[&victim]["addresses"].as_array().map_or(0, Vec::len);
    let expected_id = ConnectionId::derive(&robot, &victim.parse().unwrap(), &ServiceId::from_label("echo")).to_hex();
    let same_id = ids.len() == 1 && ids[0] == expected_id.as_str();
    // Routes drop to the survivor after the kill, then come back at full width.
    let full = rows.first().map_or(0, |r| r.3);
    let shrank = rows.iter().any(|r| r.0 >= 60 && r.3 < full);
    let resumed = rows
        .iter()
        .any(|r| r.0 > 60 && r.0 < 200 && r.3 == full && rows.iter().any(|s| s.0 < r.0 && s.0 >= 60 && s.3 < full));
    let elapsed = started.elapsed();
    let pass = ok_exit
        && rows.len() == 300
        && failures == 0
        && after_directory_kill == 0
        && same_id
        && addresses >= 2
        && shrank
        && resumed
        && elapsed < Duration::from_secs(60);
    verdict(
        7,
        "resilient identity",
        pass,
        format!(
            "{} requests, {failures} failed, connection ids for relaunched replica {}, addresses {addresses}, traffic resumed {resumed}, {elapsed:?}",
            rows.len(),
            ids.len()
        ),
    );
}

fn payload(size: usize, seed: u64) -> Bytes {
    let mut v = vec![0u8; size];
    ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut v);
    Bytes::from(v)
}

#[test]
fn criterion_08_wire_round_trip() {
    let started = Instant::now();
    let cases = 10_000u32;
    let mut runner = TestRunner::new(ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    });
    let size = prop_oneof![Just(0usize), Just(MAX_PAYLOAD), 0..=MAX_PAYLOAD];
    let strategy = (
        0..MsgType::ALL.len(),
        any::<u16>(),
        any::<[u8; 32]>(),
        any::<[u8; 16]>(),
        any::<[u8; 32]>(),
        size,
        any::<u64>(),
        any::<usize>(),
        any::<[u8; 4]>(),
        any::<u8>(),
    );
    let result = runner.run(&strategy, |(t, flags, conn, req, svc, size, seed, cut, magic, version)| {
        let env = Envelope {
            msg_type: MsgType::ALL[t],
            flags: Flags(flags),
            connection_id: ConnectionId(conn),
            request_id: RequestId(req),
            service_id: ServiceId(svc),
            payload: payload(size, seed),
        };
        let frame = env.encode().unwrap();
        prop_assert_eq!(frame.len(), HEADER_LEN + size);
        prop_assert_eq!(Envelope::decode(frame.clone()).unwrap(), env.clone());

        let cut = cut % frame.len();
        prop_assert!(Envelope::decode(frame.slice(..cut)).is_err());

        let mut bad = frame.to_vec();
        if magic != MAGIC {
            bad[..4].copy_from_slice(&magic);
            prop_assert_eq!(Envelope::decode(Bytes::from(bad.clone())), Err(WireError::BadMagic(magic)));
            bad[..4].copy_from_slice(&MAGIC);
        }
        if version != VERSION {
            bad[4] = version;
            prop_assert_eq!(Envelope::decode(Bytes::from(bad)), Err(WireError::BadVersion(version)));
        }
        Ok(())
    });
    let oversize = Envelope::new(
        MsgType::Request,
        ConnectionId::default(),
        RequestId::default(),
        ServiceId::default(),
        payload(MAX_PAYLOAD + 1, 0),
    )
    .encode();
    let elapsed = started.elapsed();
    let pass = result.is_ok() && oversize == Err(WireError::PayloadTooLarge(MAX_PAYLOAD + 1)) && elapsed < Duration::from_secs(10);
    verdict(
        8,
        "wire round trip",
        pass,
        format!("{cases} cases over 9 message types, payloads 0-64 KiB: {result:?}, {elapsed:?}"),
    );
}

#[test]
fn criterion_09_gateway_egress() {
    let started = Instant::now();
    let gateway = scenario("scenarios/gateway.toml");
    let mut direct = gateway.clone();
    direct.topology = TopologyConfig::Direct;
    let (g, d) = (sim::run(&gateway).unwrap(), sim::run(&direct).unwrap());
    let same_trace = g.trace.len() == d.trace.len() && g.trace.iter().zip(&d.trace).all(|(a, b)| a.send_ms == b.send_ms);
    let (gb, db) = (
        g.trace.iter().map(|r| r.egress_bytes).sum::<u64>(),
        d.trace.iter().map(|r| r.egress_bytes).sum::<u64>(),
    );
    let elapsed = started.elapsed();
    let pass = gateway.servers.len() == 3 && same_trace && gb * 3 == db && elapsed < Duration::from_secs(10);
    verdict(
        9,
        "gateway egress",
        pass,
        format!("gateway {gb} B, direct {db} B, ratio {:.6}, {elapsed:?}", gb as f64 / db as f64),
    );
}

#[test]
fn criterion_10_replica_sizing_cli() {
    let started = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_replicast"))
        .args(["replicas", "--uptime", "15h", "--recovery", "20m", "--target", "1e-4"])
        .output()
        .unwrap();
    let elapsed = started.elapsed();
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    // Oracle: smallest N with p^N <= target, by direct search.
    let p = 1200.0f64 / (54000.0 + 1200.0);
    let oracle = (1..).find(|&n| p.powi(n) <= 1e-4).unwrap();
    let pass = out.status.success()
        && text.lines().any(|l| l == "p_vm=0.021739")
        && text.lines().any(|l| l == format!("N={oracle}"))
        && oracle == 3
        && elapsed < Duration::from_secs(1);
    verdict(
        10,
        "replica sizing CLI",
        pass,
        format!("{} (oracle N={oracle}), {elapsed:?}", text.trim().replace('\n', " ")),
    );
}
