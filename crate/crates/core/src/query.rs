//! Post-processing over sealed snapshots: flat profile, global statistics and
//! windowed lookups.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::BufRead;

use serde::Serialize;
use thiserror::Error;

use crate::exec::{self, Exec};
use crate::model::{Breakdown, EventKind, MessageEvent, SeqEvent, TraceEvent};
use crate::snapshot::{Snapshot, SnapshotError, SnapshotReader};

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("snapshot has no session manifest")]
    EmptySnapshot,
    #[error("invalid range [{t0}, {t1}) for a session of {duration_ms} ms")]
    InvalidRange { t0: i64, t1: i64, duration_ms: i64 },
    #[error("invalid bucket size {bucket_ms} ms (clock resolution {resolution_ms} ms)")]
    InvalidBucket { bucket_ms: i64, resolution_ms: i64 },
    #[error("unknown message `{0}`")]
    UnknownMessage(String),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
}

/// A percentage held as an integer count of hundredths (`1090` is `10.90`).
/// Serializes as its two-decimal string so no float formatting is involved.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Percent(pub u32);

impl Serialize for Percent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl Percent {
    /// `100 * part / whole`, rounded half-up to two decimals. Zero when `whole` is zero.
    pub fn of(part: i64, whole: i64) -> Percent {
        if whole <= 0 || part <= 0 {
            return Percent(0);
        }
        let (part, whole) = (part as i128, whole as i128);
        Percent(((part * 20_000 + whole) / (2 * whole)) as u32)
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 100.0
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlatProfileRow {
    pub agent_id: String,
    pub name: String,
    pub iterations_nonzero: u64,
    pub overload_count: u64,
    pub activity_ms: i64,
    pub pct_session: Percent,
    pub max_ms: i64,
    /// Truncated to whole milliseconds.
    pub avg_ms: i64,
    pub msgs_sent: u64,
    pub msgs_received: u64,
    pub breakdown_ms: Option<Breakdown>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProfileHeader {
    pub total_session_ms: i64,
    pub total_activity_ms: i64,
    pub messages_sent: u64,
    pub messages_received: u64,
    pub slice_ms: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlatProfile {
    pub header: ProfileHeader,
    pub rows: Vec<FlatProfileRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalStats {
    pub total_duration_ms: i64,
    pub total_activity_ms: i64,
    pub total_messages: u64,
    pub avg_active_agents_per_sec: f64,
}

#[derive(Debug, Clone, Default)]
struct AgentAcc {
    touched: bool,
    nonzero: u64,
    overloads: u64,
    activity: i64,
    max: i64,
    sent: u64,
    received: u64,
    breakdown: Option<Breakdown>,
}

impl AgentAcc {
    fn merge(&mut self, o: AgentAcc) {
        self.touched |= o.touched;
        self.nonzero += o.nonzero;
        self.overloads += o.overloads;
        self.activity += o.activity;
        self.max = self.max.max(o.max);
        self.sent += o.sent;
        self.received += o.received;
        if let Some(b) = o.breakdown {
            *self.breakdown.get_or_insert_with(Breakdown::default) += b;
        }
    }
}

struct AgentIndex<'a> {
    ids: HashMap<&'a str, usize>,
}

impl<'a> AgentIndex<'a> {
    fn new(snapshot_agents: &'a [crate::model::AgentDescriptor]) -> Self {
        AgentIndex {
            ids: snapshot_agents
                .iter()
                .enumerate()
                .map(|(i, a)| (a.agent_id.as_str(), i))
                .collect(),
        }
    }

    fn get(&self, id: &str) -> Option<usize> {
        self.ids.get(id).copied()
    }
}

#[derive(Debug, Clone)]
struct ProfileAcc {
    agents: Vec<AgentAcc>,
    sent: u64,
    received: u64,
    activity: i64,
}

impl ProfileAcc {
    fn new(n: usize) -> Self {
        ProfileAcc {
            agents: vec![AgentAcc::default(); n],
            sent: 0,
            received: 0,
            activity: 0,
        }
    }

    fn add(&mut self, index: &AgentIndex<'_>, slice_ms: i64, ev: &TraceEvent) {
        match ev {
            TraceEvent::Iteration(it) => {
                let Some(i) = index.get(&it.agent_id) else {
                    return;
                };
                let acc = &mut self.agents[i];
                acc.touched = true;
                if it.duration_ms > 0 {
                    acc.nonzero += 1;
                    acc.activity += it.duration_ms;
                    acc.max = acc.max.max(it.duration_ms);
                    if it.duration_ms > slice_ms {
                        acc.overloads += 1;
                    }
                    self.activity += it.duration_ms;
                }
                if let Some(b) = it.breakdown {
                    *acc.breakdown.get_or_insert_with(Breakdown::default) += b;
                }
            }
            TraceEvent::Message(m) => {
                if let Some(i) = m.internal_sender().and_then(|id| index.get(id)) {
                    self.agents[i].touched = true;
                    self.agents[i].sent += 1;
                    self.sent += 1;
                }
                if !m.receiver.is_external {
                    if let Some(i) = index.get(&m.receiver.agent_id) {
                        self.agents[i].touched = true;
                        if m.received_at.is_some() {
                            self.agents[i].received += 1;
                            self.received += 1;
                        }
                    }
                }
            }
            TraceEvent::Lifecycle(_) | TraceEvent::Simple(_) => {
                if let Some(i) = ev.agent_id().and_then(|id| index.get(id)) {
                    self.agents[i].touched = true;
                }
            }
            TraceEvent::Cpu(_) => {}
        }
    }

    fn merge(mut self, other: ProfileAcc) -> ProfileAcc {
        for (a, b) in self.agents.iter_mut().zip(other.agents) {
            a.merge(b);
        }
        self.sent += other.sent;
        self.received += other.received;
        self.activity += other.activity;
        self
    }

    fn finish(self, snapshot_agents: &[crate::model::AgentDescriptor], manifest: &crate::model::SessionInfo) -> FlatProfile {
        let total = self.activity;
        let mut rows: Vec<FlatProfileRow> = self
            .agents
            .into_iter()
            .zip(snapshot_agents)
            .filter(|(acc, _)| acc.touched)
            .map(|(acc, desc)| FlatProfileRow {
                agent_id: desc.agent_id.clone(),
                name: desc.name.clone(),
                iterations_nonzero: acc.nonzero,
                overload_count: acc.overloads,
                activity_ms: acc.activity,
                pct_session: Percent::of(acc.activity, total),
                max_ms: acc.max,
                avg_ms: if acc.nonzero > 0 {
                    acc.activity / acc.nonzero as i64
                } else {
                    0
                },
                msgs_sent: acc.sent,
                msgs_received: acc.received,
                breakdown_ms: acc.breakdown,
            })
            .collect();
        rows.sort_by(|a, b| {
            b.activity_ms
                .cmp(&a.activity_ms)
                .then_with(|| a.name.cmp(&b.name))
                .then_with(|| a.agent_id.cmp(&b.agent_id))
        });
        FlatProfile {
            header: ProfileHeader {
                total_session_ms: manifest.duration_ms,
                total_activity_ms: total,
                messages_sent: self.sent,
                messages_received: self.received,
                slice_ms: manifest.slice_ms,
            },
            rows,
        }
    }
}

pub fn flat_profile(snapshot: &Snapshot) -> FlatProfile {
    flat_profile_with(snapshot, Exec::default())
}

/// Per-agent aggregates, sorted by activity descending then name ascending.
pub fn flat_profile_with(snapshot: &Snapshot, exec: Exec) -> FlatProfile {
    let index = AgentIndex::new(&snapshot.agents);
    let n = snapshot.agents.len();
    let slice = snapshot.manifest.slice_ms;
    let acc = exec::fold_reduce(
        &snapshot.events,
        exec,
        || ProfileAcc::new(n),
        |mut acc, ev: &SeqEvent| {
            acc.add(&index, slice, &ev.event);
            acc
        },
        ProfileAcc::merge,
    );
    acc.finish(&snapshot.agents, &snapshot.manifest)
}

/// Flat profile computed in one streaming pass; memory is proportional to
/// the agent count, not the event count.
pub fn flat_profile_stream<R: BufRead>(input: R) -> Result<FlatProfile, QueryError> {
    let mut reader = match SnapshotReader::new(input) {
        Ok(r) => r,
        Err(SnapshotError::Empty) => return Err(QueryError::EmptySnapshot),
        Err(e) => return Err(e.into()),
    };
    let agents = reader.agents().to_vec();
    let manifest = reader.manifest().clone();
    let index = AgentIndex::new(&agents);
    let mut acc = ProfileAcc::new(agents.len());
    for ev in reader.by_ref() {
        acc.add(&index, manifest.slice_ms, &ev?.event);
    }
    Ok(acc.finish(&agents, &manifest))
}

#[derive(Debug, Clone, Default)]
struct StatsAcc {
    activity: i64,
    messages: u64,
    active: HashSet<(i64, usize)>,
}

impl StatsAcc {
    fn merge(mut self, other: StatsAcc) -> StatsAcc {
        self.activity += other.activity;
        self.messages += other.messages;
        if self.active.len() < other.active.len() {
            let mut bigger = other.active;
            bigger.extend(self.active);
            self.active = bigger;
        } else {
            self.active.extend(other.active);
        }
        self
    }
}

pub const ACTIVITY_BUCKET_MS: i64 = 1000;

pub fn global_stats(snapshot: &Snapshot) -> GlobalStats {
    global_stats_with(snapshot, Exec::default())
}

/// Session totals. Active agents per second is the mean, over 1 s buckets,
/// of the number of distinct agents with a non-zero iteration overlapping
/// the bucket.
pub fn global_stats_with(snapshot: &Snapshot, exec: Exec) -> GlobalStats {
    let index = AgentIndex::new(&snapshot.agents);
    let acc = exec::fold_reduce(
        &snapshot.events,
        exec,
        StatsAcc::default,
        |mut acc, ev: &SeqEvent| {
            match &ev.event {
                TraceEvent::Iteration(it) if it.duration_ms > 0 => {
                    if let Some(i) = index.get(&it.agent_id) {
                        acc.activity += it.duration_ms;
                        let first = it.start.0 / ACTIVITY_BUCKET_MS;
                        let last = (it.end().0 - 1) / ACTIVITY_BUCKET_MS;
                        for b in first..=last {
                            acc.active.insert((b, i));
                        }
                    }
                }
                TraceEvent::Message(m) => {
                    if m.internal_sender().is_some_and(|id| index.get(id).is_some()) {
                        acc.messages += 1;
                    }
                }
                _ => {}
            }
            acc
        },
        StatsAcc::merge,
    );
    let duration = snapshot.manifest.duration_ms;
    let buckets = (duration + ACTIVITY_BUCKET_MS - 1) / ACTIVITY_BUCKET_MS;
    GlobalStats {
        total_duration_ms: duration,
        total_activity_ms: acc.activity,
        total_messages: acc.messages,
        avg_active_agents_per_sec: if buckets > 0 {
            acc.active.len() as f64 / buckets as f64
        } else {
            0.0
        },
    }
}

/// Filters for [`events_in_range`]. `None` means no filtering.
#[derive(Debug, Clone, Default)]
pub struct EventFilter {
    pub agents: Option<HashSet<String>>,
    pub kinds: Option<HashSet<EventKind>>,
}

impl EventFilter {
    fn accepts(&self, ev: &TraceEvent) -> bool {
        if let Some(kinds) = &self.kinds {
            if !kinds.contains(&ev.kind()) {
                return false;
            }
        }
        match &self.agents {
            None => true,
            Some(ids) => ids.iter().any(|id| ev.involves(id)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RangeHit<'a> {
    pub event: &'a SeqEvent,
    /// The event began before the range start.
    pub clipped_start: bool,
    /// The event extends past the range end.
    pub clipped_end: bool,
}

impl RangeHit<'_> {
    pub fn clipped(&self) -> bool {
        self.clipped_start || self.clipped_end
    }
}

/// Effective exclusive end of a query range: a range ending at the session
/// end also captures events stamped exactly at that instant.
pub(crate) fn effective_end(t1: i64, duration_ms: i64) -> i64 {
    if t1 >= duration_ms {
        t1 + 1
    } else {
        t1
    }
}

/// Events whose span intersects `[t0, t1)`, in snapshot order.
pub fn events_in_range<'a>(
    snapshot: &'a Snapshot,
    t0: i64,
    t1: i64,
    filter: &EventFilter,
    exec: Exec,
) -> Result<Vec<RangeHit<'a>>, QueryError> {
    let duration = snapshot.manifest.duration_ms;
    if t0 < 0 || t0 > t1 || t1 > duration {
        return Err(QueryError::InvalidRange {
            t0,
            t1,
            duration_ms: duration,
        });
    }
    let end = effective_end(t1, duration);
    Ok(exec::filter_map(&snapshot.events, exec, |ev| {
        let (s, e) = ev.event.span();
        if s >= end || e <= t0 || !filter.accepts(&ev.event) {
            return None;
        }
        Some(RangeHit {
            event: ev,
            clipped_start: s < t0,
            clipped_end: e > end,
        })
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpuBucket {
    pub bucket_start: i64,
    pub mean_load_pct: f64,
    pub max_load_pct: f64,
    pub samples: u32,
    pub empty: bool,
}

/// CPU samples grouped by `floor(at / bucket_ms)` over `[0, duration]`.
pub fn cpu_series(snapshot: &Snapshot, bucket_ms: i64) -> Result<Vec<CpuBucket>, QueryError> {
    let resolution = snapshot.manifest.clock_resolution_ms.max(1);
    if bucket_ms < resolution {
        return Err(QueryError::InvalidBucket {
            bucket_ms,
            resolution_ms: resolution,
        });
    }
    let n = (snapshot.manifest.duration_ms.max(0) / bucket_ms + 1) as usize;
    // (sum of hundredths, max hundredths, count)
    let mut acc = vec![(0u64, 0u16, 0u32); n];
    for ev in &snapshot.events {
        if let TraceEvent::Cpu(s) = &ev.event {
            let b = ((s.at.0.max(0) / bucket_ms) as usize).min(n - 1);
            let slot = &mut acc[b];
            slot.0 += u64::from(s.load.0);
            slot.1 = slot.1.max(s.load.0);
            slot.2 += 1;
        }
    }
    Ok(acc
        .into_iter()
        .enumerate()
        .map(|(i, (sum, max, count))| CpuBucket {
            bucket_start: i as i64 * bucket_ms,
            mean_load_pct: if count > 0 {
                sum as f64 / f64::from(count) / 100.0
            } else {
                0.0
            },
            max_load_pct: f64::from(max) / 100.0,
            samples: count,
            empty: count == 0,
        })
        .collect())
}

pub fn message_detail<'a>(
    snapshot: &'a Snapshot,
    message_id: &str,
) -> Result<&'a MessageEvent, QueryError> {
    snapshot
        .events
        .iter()
        .find_map(|ev| match &ev.event {
            TraceEvent::Message(m) if m.message_id == message_id => Some(m),
            _ => None,
        })
        .ok_or_else(|| QueryError::UnknownMessage(message_id.to_owned()))
}
