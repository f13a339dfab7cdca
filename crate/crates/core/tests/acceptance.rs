//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//! Tolerances are pinned in the constants below.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use masprof::cli::{self, Format};
use masprof::instrument::{ProfilerSink, VirtualClock};
use masprof::model::{
    AgentDescriptor, IterationEvent, LifecycleEvent, LifecycleKind, Rationality, Timestamp,
    TraceEvent,
};
use masprof::overshoot::{classify, SliceClass};
use masprof::query;
use masprof::report::split_row;
use masprof::scene::{self, compile_scene, Cell, Viewport};
use masprof::sim::{self, PhaseAction, ScenarioSpec, OVERSEER_ROLE, WORKER_ROLE};
use masprof::snapshot::{self, Snapshot};

const TABLE_BUDGET: Duration = Duration::from_secs(5);
const CLOSURE_BUDGET: Duration = Duration::from_secs(30);
const CLOSURE_SNAPSHOTS: u64 = 100;
const ROUNDTRIP_BUDGET: Duration = Duration::from_secs(30);
const BENCH_BUDGET: Duration = Duration::from_secs(10);
/// Overseers' share of sent messages, at least.
const OVERSEER_SENT_SHARE_MIN: f64 = 0.80;
/// Top three workers' share of total activity.
const TOP3_SHARE: (f64, f64) = (0.15, 0.50);
/// Each overseer's % session, strictly below.
const OVERSEER_PCT_MAX: u32 = 300;
const PROFILE_100K_BUDGET: Duration = Duration::from_secs(1);
const SINK_MIN_RATE: f64 = 100_000.0;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, budget: Duration) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took < budget, || format!("took {took:?}, budget {budget:?}"))?;
    Ok(took)
}

fn reference_table() -> Outcome {
    let start = Instant::now();
    let rows = common::reference_rows();
    let activity: i64 = rows.iter().map(|r| r.activity_ms).sum();
    ensure(activity == 629_164, || format!("sum of activity {activity}"))?;
    let sent: u64 = rows.iter().map(|r| r.sent).sum();
    let received: u64 = rows.iter().map(|r| r.received).sum();
    ensure(sent == 1206 && received == 1206, || format!("sent {sent} received {received}"))?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("reference.aspot");
    snapshot::write_snapshot(&path, &common::reference_snapshot()).map_err(|e| e.to_string())?;
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::cmd_profile(&path, Format::Text, &mut out, &mut err);
    ensure(code == 0, || format!("exit {code}: {}", String::from_utf8_lossy(&err)))?;
    let text = String::from_utf8(out).map_err(|e| e.to_string())?;
    let lines: Vec<&str> = text.lines().collect();
    for (i, (label, value)) in common::REFERENCE_HEADER.iter().enumerate() {
        let want = format!("{label:<20}{value}");
        ensure(lines.get(i) == Some(&want.as_str()), || {
            format!("header line {i}: {:?} != {want:?}", lines.get(i))
        })?;
    }
    let body = &lines[8..];
    ensure(body.len() == rows.len(), || format!("{} rows", body.len()))?;
    let mut cells = 0;
    for (line, want) in body.iter().zip(&rows) {
        let got = split_row(line);
        ensure(got == want.cells, || format!("row {:?} != {:?}", got, want.cells))?;
        cells += got.len();
    }
    let first = split_row(body[0]);
    ensure(first[0] == "agent001" && first[4] == "10.90" && first[6] == "0.202", || {
        format!("agent001 row {first:?}")
    })?;
    let took = within(start, TABLE_BUDGET)?;
    Ok(format!("{} rows, {cells} cells exact, {took:?}", rows.len()))
}

fn closure() -> Outcome {
    let start = Instant::now();
    for seed in 0..CLOSURE_SNAPSHOTS {
        let snap = common::random_snapshot(seed, 50 + (seed as usize * 37) % 2000);
        let p = query::flat_profile(&snap);
        let (mut activity, mut sent, mut received) = (0i64, 0u64, 0u64);
        for e in &snap.events {
            match &e.event {
                TraceEvent::Iteration(it) => activity += it.duration_ms,
                TraceEvent::Message(m) => {
                    sent += u64::from(!m.sender.is_external);
                    received += u64::from(!m.receiver.is_external && m.received_at.is_some());
                }
                _ => {}
            }
        }
        let row_sum: i64 = p.rows.iter().map(|r| r.activity_ms).sum();
        ensure(row_sum == p.header.total_activity_ms && row_sum == activity, || {
            format!("seed {seed}: activity rows {row_sum} header {} oracle {activity}", p.header.total_activity_ms)
        })?;
        ensure(p.header.messages_sent == sent && p.header.messages_received == received, || {
            format!("seed {seed}: message totals")
        })?;
        ensure(
            p.rows.iter().map(|r| r.msgs_sent).sum::<u64>() == sent
                && p.rows.iter().map(|r| r.msgs_received).sum::<u64>() == received,
            || format!("seed {seed}: row message sums"),
        )?;
        if activity > 0 {
            let pct: i64 = p.rows.iter().map(|r| i64::from(r.pct_session.0)).sum();
            // |sum - 100| <= 0.005 * rows, in hundredths
            ensure(2 * (pct - 10_000).abs() <= p.rows.len() as i64, || {
                format!("seed {seed}: pct sum {pct} over {} rows", p.rows.len())
            })?;
        }
        for w in p.rows.windows(2) {
            let ok = w[0].activity_ms > w[1].activity_ms
                || (w[0].activity_ms == w[1].activity_ms && w[0].name <= w[1].name);
            ensure(ok, || format!("seed {seed}: order {} / {}", w[0].name, w[1].name))?;
        }
    }
    let took = within(start, CLOSURE_BUDGET)?;
    Ok(format!("{CLOSURE_SNAPSHOTS} snapshots, {took:?}"))
}

fn roundtrip_one(snap: &Snapshot) -> Result<(), String> {
    let bytes = snapshot::encode(snap).map_err(|e| e.to_string())?;
    let back = snapshot::decode(&bytes).map_err(|e| e.to_string())?;
    ensure(&back == snap, || "read(write(S)) != S".into())?;
    let again = snapshot::encode(&back).map_err(|e| e.to_string())?;
    ensure(again == bytes, || "write(read(write(S))) bytes differ".into())
}

fn roundtrip() -> Outcome {
    let start = Instant::now();
    let empty = Snapshot::new(common::random_snapshot(1, 0).manifest);
    roundtrip_one(&empty)?;
    let mut single = common::random_snapshot(2, 0);
    single.events.truncate(1);
    roundtrip_one(&single)?;
    let mut cases = 2;
    for seed in 0..50 {
        roundtrip_one(&common::random_snapshot(seed, seed as usize * 20))?;
        cases += 1;
    }
    let big = common::random_snapshot(99, 100_000);
    ensure(big.events.len() >= 100_000, || format!("{} events", big.events.len()))?;
    roundtrip_one(&big)?;
    cases += 1;
    let took = within(start, ROUNDTRIP_BUDGET)?;
    Ok(format!("{cases} snapshots incl. empty, single and {} events, {took:?}", big.events.len()))
}

fn benchmark() -> Outcome {
    let start = Instant::now();
    let spec = ScenarioSpec::benchmark_default();
    let snap = sim::record_virtual(&spec).map_err(|e| e.to_string())?.snapshot;
    let p = query::flat_profile(&snap);
    let role: BTreeMap<&str, &str> = snap
        .agents
        .iter()
        .map(|a| (a.agent_id.as_str(), a.role.as_str()))
        .collect();
    let is_overseer = |id: &str| role.get(id) == Some(&OVERSEER_ROLE);

    // (a)
    let mut by_iters: Vec<_> = p.rows.iter().collect();
    by_iters.sort_by_key(|r| std::cmp::Reverse(r.iterations_nonzero));
    ensure(by_iters.len() >= 3 && is_overseer(&by_iters[0].agent_id) && is_overseer(&by_iters[1].agent_id)
        && by_iters[1].iterations_nonzero > by_iters[2].iterations_nonzero, || {
        format!("top iteration counts {:?}", by_iters.iter().take(3).map(|r| (&r.agent_id, r.iterations_nonzero)).collect::<Vec<_>>())
    })?;
    let overseer_sent: u64 = p.rows.iter().filter(|r| is_overseer(&r.agent_id)).map(|r| r.msgs_sent).sum();
    let sent_share = overseer_sent as f64 / p.header.messages_sent.max(1) as f64;
    ensure(sent_share >= OVERSEER_SENT_SHARE_MIN, || format!("(a) overseers sent {sent_share:.3}"))?;

    // (b)
    let mut workers: Vec<i64> = p
        .rows
        .iter()
        .filter(|r| role.get(r.agent_id.as_str()) == Some(&WORKER_ROLE))
        .map(|r| r.activity_ms)
        .collect();
    workers.sort_unstable_by(|a, b| b.cmp(a));
    let top3 = workers.iter().take(3).sum::<i64>() as f64 / p.header.total_activity_ms.max(1) as f64;
    ensure(top3 >= TOP3_SHARE.0 && top3 <= TOP3_SHARE.1, || format!("(b) top-3 share {top3:.3}"))?;

    // (c)
    let overseer_pcts: Vec<u32> = p.rows.iter().filter(|r| is_overseer(&r.agent_id)).map(|r| r.pct_session.0).collect();
    ensure(overseer_pcts.len() == 2 && overseer_pcts.iter().all(|&x| x < OVERSEER_PCT_MAX), || {
        format!("(c) overseer pct {overseer_pcts:?}")
    })?;

    // (d) a phase takes effect at its time, or when the iteration running then ends
    let iterations: Vec<(i64, i64)> = snap
        .events
        .iter()
        .filter_map(|e| match &e.event {
            TraceEvent::Iteration(it) => Some((it.start.0, it.end().0)),
            _ => None,
        })
        .collect();
    let pop = sim::worker_population(&snap);
    let counts: Vec<usize> = pop.iter().map(|x| x.1).collect();
    ensure(counts == [12, 27, 12, 0], || format!("(d) population {pop:?}"))?;
    let set_phases: Vec<i64> = spec
        .phases
        .iter()
        .filter(|ph| matches!(ph.action, PhaseAction::SetWorkers { .. }))
        .map(|ph| ph.at_ms)
        .collect();
    for (at, (changed, _)) in set_phases.iter().zip(&pop[1..]) {
        let on_time = changed == at
            || iterations.iter().any(|&(s, e)| s < *at && e == *changed);
        ensure(on_time, || format!("(d) change for phase at {at} happened at {changed}"))?;
    }

    // (e)
    let mut suspended = None;
    let mut window = None;
    for e in &snap.events {
        if let TraceEvent::Lifecycle(l) = &e.event {
            match l.kind {
                LifecycleKind::Suspended if suspended.is_none() => suspended = Some(l.at.0),
                LifecycleKind::Resumed if window.is_none() => window = suspended.map(|s| (s, l.at.0)),
                _ => {}
            }
        }
    }
    let (ps, pe) = window.ok_or("(e) no pause recorded")?;
    ensure(pe - ps >= 20_000 - 5_000, || format!("(e) pause window {ps}..{pe}"))?;
    let inside = iterations.iter().filter(|&&(s, e)| s < pe && e > ps && !(s == e && (s == ps || s == pe))).count();
    ensure(inside == 0, || format!("(e) {inside} iterations in pause {ps}..{pe}"))?;

    let took = within(start, BENCH_BUDGET)?;
    Ok(format!(
        "(a) overseers sent {:.1}% (b) top-3 {:.1}% (c) overseers {:?} (d) {:?} (e) quiet {ps}..{pe}, {took:?}",
        sent_share * 100.0,
        top3 * 100.0,
        overseer_pcts.iter().map(|x| format!("{}.{:02}", x / 100, x % 100)).collect::<Vec<_>>(),
        pop
    ))
}

fn classification() -> Outcome {
    ensure(classify(750, 1000) == SliceClass::Green, || "750".into())?;
    ensure(classify(1000, 1000) == SliceClass::Orange, || "1000".into())?;
    ensure(classify(1001, 1000) == SliceClass::Red, || "1001".into())?;
    let mut checked = 0u64;
    for slice in [1i64, 3, 4, 7, 100, 999, 1000, 1001, 4096] {
        let mut prev = SliceClass::Green;
        for d in 0..=5 * slice {
            let c = classify(d, slice);
            // 4d <= 3s is d <= 0.75 s without rounding
            let want = if 4 * d <= 3 * slice {
                SliceClass::Green
            } else if d <= slice {
                SliceClass::Orange
            } else {
                SliceClass::Red
            };
            ensure(c == want, || format!("classify({d}, {slice}) = {c:?}"))?;
            ensure(c >= prev, || format!("not monotone at ({d}, {slice})"))?;
            prev = c;
            checked += 1;
        }
    }
    Ok(format!("boundaries exact, {checked} durations partitioned monotonically"))
}

fn scene_geometry() -> Outcome {
    let snap = sim::record_virtual(&ScenarioSpec::benchmark_default())
        .map_err(|e| e.to_string())?
        .snapshot;
    let t = snap.manifest.duration_ms;
    let full = compile_scene(&snap, &Viewport::full(&snap, 0.01)).map_err(|e| e.to_string())?;

    let mut spans: Vec<(i64, i64)> = full.rects.iter().map(|r| (r.start_ms, r.start_ms + r.duration_ms)).collect();
    spans.sort();
    ensure(spans.windows(2).all(|w| w[0].1 <= w[1].0), || "rects overlap in time".into())?;

    let doubled = compile_scene(&snap, &Viewport::full(&snap, 0.02)).map_err(|e| e.to_string())?;
    for (a, b) in full.rects.iter().zip(&doubled.rects) {
        ensure(a.width_px == a.duration_ms as f64 * 0.01 && b.width_px == 2.0 * a.width_px, || {
            format!("width of rect {} does not scale", a.event_ref)
        })?;
    }

    let profile = query::flat_profile(&snap);
    let lanes: Vec<&str> = full.lanes.iter().map(|l| l.agent_id.as_str()).collect();
    let rows: Vec<&str> = profile.rows.iter().map(|r| r.agent_id.as_str()).collect();
    ensure(lanes == rows, || "lane order differs from profile order".into())?;

    let bounds: Vec<i64> = (0..=8).map(|i| t * i / 8).chain([t / 3 + 1]).collect::<BTreeSet<_>>().into_iter().collect();
    let mut seen: BTreeMap<u64, usize> = BTreeMap::new();
    for w in bounds.windows(2) {
        let part = compile_scene(&snap, &Viewport::new(w[0], w[1], 0.01)).map_err(|e| e.to_string())?;
        for r in part.rects {
            *seen.entry(r.event_ref).or_default() += 1;
        }
    }
    for r in &full.rects {
        let (s, e) = (r.start_ms, r.start_ms + r.duration_ms);
        let want = bounds.windows(2).filter(|w| s < w[1] && e > w[0]).count();
        ensure(seen.get(&r.event_ref) == Some(&want), || format!("rect {} seen {:?} want {want}", r.event_ref, seen.get(&r.event_ref)))?;
    }
    ensure(seen.len() == full.rects.len(), || "partition produced extra rects".into())?;

    for w in [1u32, 256, 1000] {
        let be = scene::birds_eye(&snap, w);
        ensure(be.bucket_start(0) == 0 && be.bucket_start(w) == t, || format!("{w} buckets do not span the session"))?;
        let covered: i64 = (0..w).map(|i| {
            let (a, b) = be.bucket_span(i);
            b - a
        }).sum();
        ensure(covered == t, || format!("{w} buckets cover {covered} of {t} ms"))?;
        for i in 0..w {
            let (a, b) = be.bucket_span(i);
            if a < b {
                ensure(be.bucket_of(a) == i && be.bucket_of(b - 1) == i, || format!("bucket_of mismatch at {i}"))?;
            }
        }
        let painted = be.lanes.iter().flat_map(|l| &l.cells).filter(|c| **c != Cell::Empty).count();
        ensure(painted > 0, || "empty overview".into())?;
    }
    Ok(format!(
        "{} rects, {} lanes, {} partitions, overview tiles exactly",
        full.rects.len(),
        full.lanes.len(),
        bounds.len() - 1
    ))
}

fn throughput() -> Outcome {
    let snap = common::random_snapshot(5, 100_000);
    let start = Instant::now();
    let p = query::flat_profile(&snap);
    let profile_time = start.elapsed();
    ensure(!p.rows.is_empty(), || "no rows".into())?;
    ensure(profile_time < PROFILE_100K_BUDGET, || format!("flat_profile took {profile_time:?}"))?;

    let clock = Arc::new(VirtualClock::default());
    let sink = ProfilerSink::new(clock.clone());
    sink.begin_session("local", 1000).map_err(|e| e.to_string())?;
    clock.set(10_000_000);
    sink.register_agent(AgentDescriptor::new("a", "a", "worker", Rationality::Reactive))
        .map_err(|e| e.to_string())?;
    sink.record(TraceEvent::Lifecycle(LifecycleEvent {
        agent_id: "a".into(),
        kind: LifecycleKind::Created,
        at: Timestamp(0),
    }))
    .map_err(|e| e.to_string())?;
    let n = 300_000i64;
    let events: Vec<TraceEvent> = (0..n)
        .map(|i| {
            TraceEvent::Iteration(IterationEvent {
                agent_id: "a".into(),
                start: Timestamp(i * 10),
                duration_ms: 5,
                breakdown: None,
            })
        })
        .collect();
    let start = Instant::now();
    for ev in events {
        sink.record(ev).map_err(|e| e.to_string())?;
    }
    let rate = n as f64 / start.elapsed().as_secs_f64();
    let handle = sink.end_session().map_err(|e| e.to_string())?;
    ensure(handle.snapshot.events.len() == n as usize + 1, || "events dropped".into())?;
    ensure(rate >= SINK_MIN_RATE, || format!("sink rate {rate:.0}/s"))?;
    Ok(format!(
        "flat_profile over {} events in {profile_time:?}; sink {:.0} record()/s",
        snap.events.len(),
        rate
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("reference flat profile reproduced cell-for-cell", reference_table),
        ("conservation and closure properties", closure),
        ("snapshot roundtrip", roundtrip),
        ("benchmark scenario end-to-end", benchmark),
        ("classification boundaries", classification),
        ("scene geometry", scene_geometry),
        ("throughput", throughput),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
