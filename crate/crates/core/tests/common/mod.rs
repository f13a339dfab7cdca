//! Shared fixtures: the reference flat profile, a snapshot synthesized to
//! reproduce it, and a seeded generator of arbitrary valid snapshots.
#![allow(dead_code)]

use chrono::DateTime;
use masprof::model::{
    AgentDescriptor, Breakdown, CpuSample, Endpoint, FipaHeaders, IterationEvent, LifecycleEvent,
    LifecycleKind, Load, MessageEvent, MessageScope, Rationality, SeqEvent, SessionInfo,
    SimpleEvent, Timestamp, TraceEvent,
};
use masprof::snapshot::Snapshot;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const REFERENCE_SESSION_MS: i64 = 1_130_691;
pub const REFERENCE_SLICE_MS: i64 = 1000;

pub const REFERENCE_HEADER: [(&str, &str); 5] = [
    ("Total Session Time", "18:50.691"),
    ("Total Activity", "10:29.164"),
    ("Messages Sent", "1206"),
    ("Messages Received", "1206"),
    ("Time Slice Duration", "1000 ms"),
];

/// Agent, T>0, overloads, activity, % session, Max(T), Average(T), sent, received.
pub const REFERENCE_TABLE: &str = "\
agent001 338 22 1:08.564 10.90 3.740 0.202 6 57
agent009 365 21 1:04.257 10.21 3.425 0.176 13 77
agent004 349 22 1:01.529 9.78 3.235 0.176 10 69
agent014 284 14 46.413 7.38 3.148 0.163 2 36
agent003 401 13 43.881 6.97 3.323 0.109 12 76
agent006 361 12 40.141 6.38 3.279 0.111 12 73
agent005 367 12 34.903 5.55 3.325 0.095 17 76
agent013 301 9 34.716 5.52 3.190 0.115 14 71
agent007 378 11 31.864 5.06 3.356 0.084 21 71
agent008 357 7 30.850 4.90 3.201 0.086 14 72
agent010 330 8 30.280 4.81 3.147 0.091 21 81
agent015 285 9 29.382 4.67 3.257 0.103 4 42
agent002 348 8 23.196 3.69 3.147 0.066 9 70
agent011 357 5 19.363 3.08 3.095 0.054 4 39
agent012 225 3 13.172 2.09 3.049 0.058 9 41
master2 901 0 6.681 1.06 0.183 0.007 504 86
master1 873 0 6.485 1.03 0.227 0.007 514 82
agent024 46 2 6.281 1.00 3.045 0.136 3 7
agent019 31 1 4.449 0.71 3.014 0.143 0 5
agent026 42 1 4.400 0.70 3.084 0.104 0 4
agent030 26 1 4.002 0.64 3.132 0.153 2 8
agent017 46 1 3.811 0.61 3.031 0.082 0 3
agent025 40 1 3.767 0.60 3.006 0.094 0 3
agent027 31 1 3.694 0.59 3.103 0.119 0 2
agent018 38 1 3.384 0.54 3.044 0.089 2 7
agent020 39 0 1.762 0.28 0.547 0.045 0 3
agent022 47 0 1.523 0.24 0.559 0.032 5 13
agent021 32 0 1.300 0.21 0.555 0.040 2 7
agent016 219 0 1.194 0.19 0.555 0.005 2 6
agent029 38 0 1.039 0.17 0.550 0.027 2 8
agent028 45 0 0.749 0.12 0.546 0.016 1 4
agent032 34 0 0.749 0.12 0.561 0.022 1 4
agent031 36 0 0.742 0.12 0.545 0.020 0 2
agent023 40 0 0.598 0.10 0.543 0.014 0 1
agent033 30 0 0.043 0.01 0.003 0.001 0 0";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefRow {
    pub name: String,
    pub iterations: u64,
    pub overloads: u64,
    pub activity_ms: i64,
    pub max_ms: i64,
    pub sent: u64,
    pub received: u64,
    /// The row exactly as printed, split into cells.
    pub cells: Vec<String>,
}

/// Parses `m:ss.mmm` or `s.mmm` into milliseconds.
pub fn parse_ms(s: &str) -> i64 {
    let (minutes, rest) = match s.split_once(':') {
        Some((m, r)) => (m.parse::<i64>().unwrap(), r),
        None => (0, s),
    };
    let (secs, millis) = rest.split_once('.').unwrap();
    minutes * 60_000 + secs.parse::<i64>().unwrap() * 1000 + millis.parse::<i64>().unwrap()
}

pub fn reference_rows() -> Vec<RefRow> {
    REFERENCE_TABLE
        .lines()
        .map(|line| {
            let c: Vec<&str> = line.split_whitespace().collect();
            assert_eq!(c.len(), 9, "{line}");
            RefRow {
                name: c[0].to_owned(),
                iterations: c[1].parse().unwrap(),
                overloads: c[2].parse().unwrap(),
                activity_ms: parse_ms(c[3]),
                max_ms: parse_ms(c[5]),
                sent: c[7].parse().unwrap(),
                received: c[8].parse().unwrap(),
                cells: c.iter().map(|s| s.to_string()).collect(),
            }
        })
        .collect()
}

/// Iteration durations with the row's count, sum, maximum and overload count.
///
/// One iteration at the maximum, the other overloads just above the slice,
/// and the remainder spread evenly at or below `min(slice, max)`.
pub fn row_durations(row: &RefRow, slice: i64) -> Vec<i64> {
    let n = row.iterations as usize;
    if n == 0 {
        return Vec::new();
    }
    let mut out = vec![row.max_ms];
    let extra_overloads = row.overloads.saturating_sub(1) as usize;
    if row.overloads > 0 {
        assert!(row.max_ms > slice, "{}: overloads need Max(T) above the slice", row.name);
    } else {
        assert!(row.max_ms <= slice, "{}: no overloads but Max(T) above the slice", row.name);
    }
    let mut overloads = vec![slice + 1; extra_overloads];
    let rest_n = n - 1 - extra_overloads;
    let cap = slice.min(row.max_ms);
    let mut remainder = row.activity_ms - row.max_ms - overloads.iter().sum::<i64>();
    // Push surplus into the overload iterations while they stay at or below the max.
    for o in overloads.iter_mut() {
        let surplus = remainder - rest_n as i64 * cap;
        if surplus <= 0 {
            break;
        }
        let bump = surplus.min(row.max_ms - *o);
        *o += bump;
        remainder -= bump;
    }
    out.extend(overloads);
    if rest_n > 0 {
        let r = rest_n as i64;
        assert!(remainder >= r && remainder <= r * cap, "{}: infeasible row", row.name);
        let (base, plus) = (remainder / r, remainder % r);
        out.extend((0..r).map(|i| base + i64::from(i < plus)));
    } else {
        assert_eq!(remainder, 0, "{}: infeasible row", row.name);
    }
    out
}

/// Snapshot whose flat profile is the reference table.
pub fn reference_snapshot() -> Snapshot {
    let rows = reference_rows();
    let platform = "local";
    let mut manifest = SessionInfo::new(
        "reference-fixture",
        platform,
        DateTime::from_timestamp_millis(1_244_000_000_000).unwrap(),
        REFERENCE_SLICE_MS,
    );
    manifest.duration_ms = REFERENCE_SESSION_MS;
    let mut snap = Snapshot::new(manifest);
    let mut events: Vec<TraceEvent> = Vec::new();
    for row in &rows {
        let (role, rationality) = if row.name.starts_with("master") {
            ("overseer", Rationality::Deliberative)
        } else {
            ("worker", Rationality::Reactive)
        };
        snap.agents
            .push(AgentDescriptor::new(&row.name, &row.name, role, rationality));
        events.push(TraceEvent::Lifecycle(LifecycleEvent {
            agent_id: row.name.clone(),
            kind: LifecycleKind::Created,
            at: Timestamp(0),
        }));
    }
    let mut t = 0;
    for row in &rows {
        for d in row_durations(row, REFERENCE_SLICE_MS) {
            events.push(TraceEvent::Iteration(IterationEvent {
                agent_id: row.name.clone(),
                start: Timestamp(t),
                duration_ms: d,
                breakdown: None,
            }));
            t += d;
        }
    }
    let senders: Vec<&str> = rows
        .iter()
        .flat_map(|r| std::iter::repeat_n(r.name.as_str(), r.sent as usize))
        .collect();
    let receivers: Vec<&str> = rows
        .iter()
        .flat_map(|r| std::iter::repeat_n(r.name.as_str(), r.received as usize))
        .collect();
    assert_eq!(senders.len(), receivers.len());
    let n = senders.len();
    let shift = (0..n)
        .find(|&k| (0..n).all(|i| senders[i] != receivers[(i + k) % n]))
        .expect("a self-free pairing exists");
    for i in 0..n {
        let sent_at = t + 2 * i as i64;
        events.push(TraceEvent::Message(MessageEvent {
            message_id: format!("msg{i:05}"),
            sender: Endpoint::internal(platform, senders[i]),
            receiver: Endpoint::internal(platform, receivers[(i + shift) % n]),
            sent_at: Timestamp(sent_at),
            received_at: Some(Timestamp(sent_at + 1)),
            headers: FipaHeaders {
                performative: "inform".into(),
                conversation_id: None,
                content: format!("payload {i}"),
                other: Vec::new(),
            },
            scope: MessageScope::IntraPlatform,
        }));
    }
    assert!(t + 2 * n as i64 <= REFERENCE_SESSION_MS);
    snap.events = events
        .into_iter()
        .enumerate()
        .map(|(i, event)| SeqEvent { seq: i as u64, event })
        .collect();
    snap.sort_events();
    snap
}

/// Arbitrary valid snapshot with roughly `n_events` events, built from `seed`.
///
/// Covers every event kind, pending and inter-platform messages, iterations
/// with breakdowns and zero durations, and agents that are never active.
pub fn random_snapshot(seed: u64, n_events: usize) -> Snapshot {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let platform = "home";
    let duration = rng.random_range(1..2_000_000i64);
    let mut manifest = SessionInfo::new(
        format!("gen-{seed}"),
        platform,
        DateTime::from_timestamp_millis(1_600_000_000_000 + seed as i64 % 1_000_000).unwrap(),
        rng.random_range(1..3000),
    );
    manifest.duration_ms = duration;
    let mut snap = Snapshot::new(manifest);
    let n_agents = rng.random_range(1..12usize);
    let ids: Vec<String> = (0..n_agents).map(|i| format!("a{i:02}")).collect();
    for (i, id) in ids.iter().enumerate() {
        // Same display name for a pair of agents exercises the id tiebreak.
        let name = format!("agent-{}", i / 2);
        let rationality = if rng.random_bool(0.5) {
            Rationality::Deliberative
        } else {
            Rationality::Reactive
        };
        snap.agents
            .push(AgentDescriptor::new(id, name, "role", rationality));
    }
    let mut events = Vec::new();
    for id in &ids {
        events.push(TraceEvent::Lifecycle(LifecycleEvent {
            agent_id: id.clone(),
            kind: LifecycleKind::Created,
            at: Timestamp(0),
        }));
    }
    let mut cpu_at = 0;
    // keeps roughly every sample inside the session
    let cpu_step = (duration / (n_events as i64 / 10 + 1)).clamp(1, 1000);
    let mut msg = 0;
    for _ in 0..n_events {
        let agent = ids[rng.random_range(0..n_agents)].clone();
        let at = rng.random_range(0..=duration);
        let ev = match rng.random_range(0..10) {
            0..=4 => {
                let start = rng.random_range(0..=duration);
                let d = match rng.random_range(0..4) {
                    0 => 0,
                    _ => rng.random_range(0..=(duration - start).min(5000)),
                };
                let breakdown = rng.random_bool(0.3).then(|| {
                    let p = rng.random_range(0..=d);
                    let r = rng.random_range(0..=d - p);
                    Breakdown {
                        perception_ms: p,
                        reasoning_ms: r,
                        action_ms: d - p - r,
                    }
                });
                TraceEvent::Iteration(IterationEvent {
                    agent_id: agent,
                    start: Timestamp(start),
                    duration_ms: d,
                    breakdown,
                })
            }
            5..=7 => {
                msg += 1;
                let receiver = ids[rng.random_range(0..n_agents)].clone();
                let received_at = match rng.random_range(0..5) {
                    0 => None,
                    _ => Some(Timestamp(rng.random_range(at..=duration))),
                };
                let (sender, receiver, scope) = match rng.random_range(0..6) {
                    0 => (
                        Endpoint::external("far", "x"),
                        Endpoint::internal(platform, receiver),
                        MessageScope::InterPlatform,
                    ),
                    1 => (
                        Endpoint::internal(platform, agent),
                        Endpoint::external("far", "y"),
                        MessageScope::InterPlatform,
                    ),
                    _ => (
                        Endpoint::internal(platform, agent),
                        Endpoint::internal(platform, receiver),
                        MessageScope::IntraPlatform,
                    ),
                };
                TraceEvent::Message(MessageEvent {
                    message_id: format!("m{msg}"),
                    sender,
                    receiver,
                    sent_at: Timestamp(at),
                    received_at,
                    headers: FipaHeaders {
                        performative: "request".into(),
                        conversation_id: rng.random_bool(0.5).then(|| format!("c{msg}")),
                        content: "(do \"it\")\n\u{e9}".into(),
                        other: vec![("language".into(), "fipa-sl".into())],
                    },
                    scope,
                })
            }
            8 => TraceEvent::Simple(SimpleEvent {
                agent_id: agent,
                at: Timestamp(at),
                kind: "milestone".into(),
                payload: rng.random_bool(0.5).then(|| "p".to_owned()),
            }),
            _ => {
                cpu_at += rng.random_range(1..=cpu_step);
                if cpu_at > duration {
                    continue;
                }
                TraceEvent::Cpu(CpuSample {
                    at: Timestamp(cpu_at),
                    load: Load(rng.random_range(0..=10_000)),
                })
            }
        };
        events.push(ev);
    }
    snap.events = events
        .into_iter()
        .enumerate()
        .map(|(i, event)| SeqEvent { seq: i as u64, event })
        .collect();
    snap.sort_events();
    snap
}
