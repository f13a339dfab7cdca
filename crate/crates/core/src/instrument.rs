//! Capture side: an event sink with an injectable clock.
//!
//! Producers call [`ProfilerSink::record`] from any thread. Events are
//! buffered and sealed into a [`Snapshot`] by [`ProfilerSink::end_session`].

use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicI64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use chrono::{DateTime, TimeDelta, Utc};
use thiserror::Error;

use crate::model::{
    validate_event, AgentDescriptor, AgentRegistry, CpuSample, Load, SeqEvent, SessionInfo,
    Timestamp, TraceEvent, ValidationError,
};
use crate::snapshot::{self, Snapshot, SnapshotError};

pub const DEFAULT_SAMPLER_INTERVAL_MS: i64 = 1000;

/// Source of "now" for a capture. Times are milliseconds from an arbitrary origin.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> i64;
    fn wallclock(&self) -> DateTime<Utc>;
    /// Move time forward to `t_ms`. Virtual clocks jump, wall clocks sleep.
    fn advance_to(&self, t_ms: i64);
}

/// Manually driven clock for deterministic captures.
#[derive(Debug)]
pub struct VirtualClock {
    origin: DateTime<Utc>,
    now: AtomicI64,
}

impl VirtualClock {
    pub fn new(origin: DateTime<Utc>) -> Self {
        VirtualClock {
            origin,
            now: AtomicI64::new(0),
        }
    }

    pub fn set(&self, t_ms: i64) {
        self.now.store(t_ms, Ordering::SeqCst);
    }
}

impl Default for VirtualClock {
    fn default() -> Self {
        VirtualClock::new(DateTime::UNIX_EPOCH)
    }
}

impl Clock for VirtualClock {
    fn now_ms(&self) -> i64 {
        self.now.load(Ordering::SeqCst)
    }

    fn wallclock(&self) -> DateTime<Utc> {
        self.origin + TimeDelta::milliseconds(self.now_ms())
    }

    fn advance_to(&self, t_ms: i64) {
        self.now.fetch_max(t_ms, Ordering::SeqCst);
    }
}

/// Host wall clock.
#[derive(Debug)]
pub struct WallClock {
    origin: Instant,
    origin_wall: DateTime<Utc>,
}

impl WallClock {
    pub fn new() -> Self {
        WallClock {
            origin: Instant::now(),
            origin_wall: Utc::now(),
        }
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now_ms(&self) -> i64 {
        self.origin.elapsed().as_millis() as i64
    }

    fn wallclock(&self) -> DateTime<Utc> {
        self.origin_wall + TimeDelta::milliseconds(self.now_ms())
    }

    fn advance_to(&self, t_ms: i64) {
        let now = self.now_ms();
        if t_ms > now {
            std::thread::sleep(Duration::from_millis((t_ms - now) as u64));
        }
    }
}

/// Where CPU load figures come from. `None` signals a failed read.
pub trait LoadSource: Send {
    fn load_pct(&mut self, window_start_ms: i64, window_end_ms: i64) -> Option<f64>;
}

/// Reports zero load. Default until a real source is installed.
#[derive(Debug, Default)]
pub struct IdleLoad;

impl LoadSource for IdleLoad {
    fn load_pct(&mut self, _: i64, _: i64) -> Option<f64> {
        Some(0.0)
    }
}

/// Ledger of busy intervals kept by a simulated platform; load is the busy
/// fraction of the sampling window.
#[derive(Debug, Clone, Default)]
pub struct BusyLedger {
    intervals: Arc<Mutex<Vec<(i64, i64)>>>,
}

impl BusyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `[start, end)`. Intervals must be appended in start order and not overlap.
    pub fn add(&self, start: i64, end: i64) {
        if end > start {
            lock(&self.intervals).push((start, end));
        }
    }

    pub fn busy_ms(&self, window_start: i64, window_end: i64) -> i64 {
        let intervals = lock(&self.intervals);
        // First interval that might end after the window start.
        let first = intervals.partition_point(|&(_, end)| end <= window_start);
        intervals[first..]
            .iter()
            .take_while(|&&(start, _)| start < window_end)
            .map(|&(start, end)| end.min(window_end) - start.max(window_start))
            .filter(|&d| d > 0)
            .sum()
    }
}

impl LoadSource for BusyLedger {
    fn load_pct(&mut self, window_start: i64, window_end: i64) -> Option<f64> {
        let window = window_end - window_start;
        if window <= 0 {
            return Some(0.0);
        }
        Some(100.0 * self.busy_ms(window_start, window_end) as f64 / window as f64)
    }
}

/// Host CPU load from `/proc/stat` deltas between consecutive samples.
#[derive(Debug, Default)]
pub struct HostLoad {
    previous: Option<(u64, u64)>,
}

impl HostLoad {
    pub fn new() -> Self {
        Self::default()
    }

    fn read_totals() -> Option<(u64, u64)> {
        let stat = std::fs::read_to_string("/proc/stat").ok()?;
        let line = stat.lines().find(|l| l.starts_with("cpu "))?;
        let fields: Vec<u64> = line
            .split_whitespace()
            .skip(1)
            .filter_map(|f| f.parse().ok())
            .collect();
        if fields.len() < 4 {
            return None;
        }
        // idle + iowait
        let idle = fields[3] + fields.get(4).copied().unwrap_or(0);
        Some((fields.iter().sum(), idle))
    }
}

impl LoadSource for HostLoad {
    fn load_pct(&mut self, _: i64, _: i64) -> Option<f64> {
        let now = Self::read_totals()?;
        let prev = self.previous.replace(now);
        let (total0, idle0) = prev.unwrap_or((0, 0));
        let total = now.0.saturating_sub(total0);
        let idle = now.1.saturating_sub(idle0);
        if total == 0 {
            return Some(0.0);
        }
        Some(100.0 * (total - idle.min(total)) as f64 / total as f64)
    }
}

#[derive(Debug, Error)]
pub enum SinkError {
    #[error("a session is already open on this sink")]
    SessionAlreadyOpen,
    #[error("no open session")]
    SessionClosed,
    #[error("slice_ms must be at least 1, got {0}")]
    InvalidSlice(i64),
    #[error("agent `{0}` registered twice")]
    DuplicateAgent(String),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
}

struct Capture {
    session: SessionInfo,
    start_ms: i64,
    agents: Vec<AgentDescriptor>,
    registry: AgentRegistry,
    buffer: Vec<SeqEvent>,
    next_seq: u64,
    warnings: Vec<String>,
}

enum SinkState {
    Idle,
    Open(Box<Capture>),
}

/// Sealed result of a capture.
#[derive(Debug, Clone)]
pub struct SnapshotHandle {
    pub snapshot: Snapshot,
    /// Canonical file bytes, integrity record included.
    pub bytes: Vec<u8>,
    pub warnings: Vec<String>,
}

impl SnapshotHandle {
    pub fn persist(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, &self.bytes)
    }
}

pub struct ProfilerSink {
    clock: Arc<dyn Clock>,
    enabled: AtomicBool,
    sampler_interval_ms: i64,
    state: Mutex<SinkState>,
    load_source: Mutex<Box<dyn LoadSource>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

impl ProfilerSink {
    pub fn new(clock: Arc<dyn Clock>) -> Self {
        ProfilerSink {
            clock,
            enabled: AtomicBool::new(true),
            sampler_interval_ms: DEFAULT_SAMPLER_INTERVAL_MS,
            state: Mutex::new(SinkState::Idle),
            load_source: Mutex::new(Box::new(IdleLoad)),
        }
    }

    pub fn with_sampler_interval(mut self, interval_ms: i64) -> Self {
        self.sampler_interval_ms = interval_ms.max(1);
        self
    }

    pub fn sampler_interval_ms(&self) -> i64 {
        self.sampler_interval_ms
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn set_load_source(&self, source: Box<dyn LoadSource>) {
        *lock(&self.load_source) = source;
    }

    /// A disabled sink accepts and discards every recording call.
    pub fn set_enabled(&self, enabled: bool) {
        self.enabled.store(enabled, Ordering::Relaxed);
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled.load(Ordering::Relaxed)
    }

    pub fn is_open(&self) -> bool {
        matches!(*lock(&self.state), SinkState::Open(_))
    }

    /// Session-relative time of the clock.
    pub fn now(&self) -> Result<Timestamp, SinkError> {
        match &*lock(&self.state) {
            SinkState::Open(c) => Ok(Timestamp(self.clock.now_ms() - c.start_ms)),
            SinkState::Idle => Err(SinkError::SessionClosed),
        }
    }

    pub fn begin_session(&self, platform_name: &str, slice_ms: i64) -> Result<(), SinkError> {
        let wall = self.clock.wallclock();
        let id = format!("{platform_name}-{}", wall.timestamp_millis());
        self.begin_session_with_id(&id, platform_name, slice_ms)
    }

    pub fn begin_session_with_id(
        &self,
        session_id: &str,
        platform_name: &str,
        slice_ms: i64,
    ) -> Result<(), SinkError> {
        if slice_ms < 1 {
            return Err(SinkError::InvalidSlice(slice_ms));
        }
        let mut state = lock(&self.state);
        if matches!(*state, SinkState::Open(_)) {
            return Err(SinkError::SessionAlreadyOpen);
        }
        let session = SessionInfo::new(
            session_id,
            platform_name,
            self.clock.wallclock(),
            slice_ms,
        );
        *state = SinkState::Open(Box::new(Capture {
            session,
            start_ms: self.clock.now_ms(),
            agents: Vec::new(),
            registry: AgentRegistry::new(),
            buffer: Vec::new(),
            next_seq: 0,
            warnings: Vec::new(),
        }));
        Ok(())
    }

    pub fn register_agent(&self, agent: AgentDescriptor) -> Result<(), SinkError> {
        let mut state = lock(&self.state);
        let SinkState::Open(cap) = &mut *state else {
            return Err(SinkError::SessionClosed);
        };
        if agent.agent_id.is_empty() {
            return Err(ValidationError::EmptyField("agent_id").into());
        }
        if !cap.registry.register(&agent.agent_id) {
            return Err(SinkError::DuplicateAgent(agent.agent_id));
        }
        cap.agents.push(agent);
        Ok(())
    }

    pub fn record(&self, event: TraceEvent) -> Result<(), SinkError> {
        if !self.enabled.load(Ordering::Relaxed) {
            return Ok(());
        }
        let now = self.clock.now_ms();
        let mut state = lock(&self.state);
        let SinkState::Open(cap) = &mut *state else {
            return Err(SinkError::SessionClosed);
        };
        cap.session.duration_ms = (now - cap.start_ms).max(cap.session.duration_ms);
        validate_event(&event, &cap.session, &cap.registry)?;
        cap.registry.observe(&event);
        let seq = cap.next_seq;
        cap.next_seq += 1;
        cap.buffer.push(SeqEvent { seq, event });
        Ok(())
    }

    /// Samples the load source over the last sampler interval and records the sample.
    ///
    /// A failed read records 0% and adds a warning to the session log. A
    /// sample at the same instant as the previous one is returned but not
    /// recorded again.
    pub fn sample_cpu(&self) -> Result<CpuSample, SinkError> {
        let at = self.now()?;
        let window_start = (at.0 - self.sampler_interval_ms).max(0);
        let reading = lock(&self.load_source).load_pct(window_start, at.0);
        let load = match reading {
            Some(pct) => Load::from_pct(pct),
            None => {
                log::warn!("cpu load read failed at {at}; recording 0%");
                if let SinkState::Open(cap) = &mut *lock(&self.state) {
                    cap.warnings
                        .push(format!("cpu load read failed at {} ms", at.0));
                }
                Load(0)
            }
        };
        let sample = CpuSample { at, load };
        match self.record(TraceEvent::Cpu(sample)) {
            Ok(()) | Err(SinkError::Invalid(ValidationError::CpuSampleNotIncreasing { .. })) => {
                Ok(sample)
            }
            Err(e) => Err(e),
        }
    }

    /// Flushes the buffer in `(timestamp, seq)` order and seals the snapshot.
    pub fn end_session(&self) -> Result<SnapshotHandle, SinkError> {
        let now = self.clock.now_ms();
        let cap = {
            let mut state = lock(&self.state);
            match std::mem::replace(&mut *state, SinkState::Idle) {
                SinkState::Open(cap) => cap,
                SinkState::Idle => return Err(SinkError::SessionClosed),
            }
        };
        let Capture {
            mut session,
            start_ms,
            agents,
            mut buffer,
            warnings,
            ..
        } = *cap;
        session.duration_ms = (now - start_ms).max(session.duration_ms);
        buffer.sort_by_key(SeqEvent::sort_key);
        let snapshot = Snapshot {
            manifest: session,
            agents,
            events: buffer,
        };
        let bytes = snapshot::encode(&snapshot)?;
        Ok(SnapshotHandle {
            snapshot,
            bytes,
            warnings,
        })
    }
}
