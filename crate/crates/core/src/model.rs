//! Event vocabulary and session metadata.
//!
//! Every timestamp is an integer number of milliseconds relative to the
//! start of the capture session. Durations are integer milliseconds too, so
//! all profile arithmetic is exact.

use std::collections::HashMap;
use std::fmt;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Snapshot format version written by this build.
pub const FORMAT_VERSION: u32 = 1;

/// Milliseconds since session start.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0);

    pub fn ms(self) -> i64 {
        self.0
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms", self.0)
    }
}

/// Metadata for one uninterrupted capture session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub format_version: u32,
    pub session_id: String,
    pub platform_name: String,
    #[serde(with = "wallclock_ms")]
    pub started_at_wallclock: DateTime<Utc>,
    pub duration_ms: i64,
    /// Scheduler time-slice allocation.
    pub slice_ms: i64,
    pub clock_resolution_ms: i64,
}

impl SessionInfo {
    pub fn new(
        session_id: impl Into<String>,
        platform_name: impl Into<String>,
        started_at_wallclock: DateTime<Utc>,
        slice_ms: i64,
    ) -> Self {
        SessionInfo {
            format_version: FORMAT_VERSION,
            session_id: session_id.into(),
            platform_name: platform_name.into(),
            started_at_wallclock: truncate_to_ms(started_at_wallclock),
            duration_ms: 0,
            slice_ms,
            clock_resolution_ms: 1,
        }
    }
}

pub(crate) fn truncate_to_ms(t: DateTime<Utc>) -> DateTime<Utc> {
    Utc.timestamp_millis_opt(t.timestamp_millis())
        .single()
        .unwrap_or(t)
}

mod wallclock_ms {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Millis, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&raw)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rationality {
    Reactive,
    Deliberative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentDescriptor {
    pub agent_id: String,
    pub name: String,
    pub role: String,
    pub rationality: Rationality,
}

impl AgentDescriptor {
    pub fn new(
        agent_id: impl Into<String>,
        name: impl Into<String>,
        role: impl Into<String>,
        rationality: Rationality,
    ) -> Self {
        AgentDescriptor {
            agent_id: agent_id.into(),
            name: name.into(),
            role: role.into(),
            rationality,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LifecycleKind {
    Created,
    Started,
    Stopped,
    Suspended,
    Resumed,
    Destroyed,
}

impl LifecycleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LifecycleKind::Created => "created",
            LifecycleKind::Started => "started",
            LifecycleKind::Stopped => "stopped",
            LifecycleKind::Suspended => "suspended",
            LifecycleKind::Resumed => "resumed",
            LifecycleKind::Destroyed => "destroyed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifecycleEvent {
    pub agent_id: String,
    pub kind: LifecycleKind,
    pub at: Timestamp,
}

/// Split of a deliberative agent's iteration time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Breakdown {
    pub perception_ms: i64,
    pub reasoning_ms: i64,
    pub action_ms: i64,
}

impl Breakdown {
    pub fn total(&self) -> i64 {
        self.perception_ms + self.reasoning_ms + self.action_ms
    }
}

impl std::ops::AddAssign for Breakdown {
    fn add_assign(&mut self, rhs: Breakdown) {
        self.perception_ms += rhs.perception_ms;
        self.reasoning_ms += rhs.reasoning_ms;
        self.action_ms += rhs.action_ms;
    }
}

/// One scheduler-granted iteration of an agent (a timed performance event).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationEvent {
    pub agent_id: String,
    pub start: Timestamp,
    pub duration_ms: i64,
    pub breakdown: Option<Breakdown>,
}

impl IterationEvent {
    pub fn end(&self) -> Timestamp {
        Timestamp(self.start.0 + self.duration_ms)
    }
}

/// Timestamp-only performance event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimpleEvent {
    pub agent_id: String,
    pub at: Timestamp,
    pub kind: String,
    pub payload: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Endpoint {
    pub platform_id: String,
    pub agent_id: String,
    pub is_external: bool,
}

impl Endpoint {
    pub fn internal(platform_id: impl Into<String>, agent_id: impl Into<String>) -> Self {
        Endpoint {
            platform_id: platform_id.into(),
            agent_id: agent_id.into(),
            is_external: false,
        }
    }

    pub fn external(platform_id: impl Into<String>, agent_id: impl Into<String>) -> Self {
        Endpoint {
            platform_id: platform_id.into(),
            agent_id: agent_id.into(),
            is_external: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FipaHeaders {
    pub performative: String,
    pub conversation_id: Option<String>,
    pub content: String,
    pub other: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageScope {
    IntraPlatform,
    InterPlatform,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageEvent {
    pub message_id: String,
    pub sender: Endpoint,
    pub receiver: Endpoint,
    pub sent_at: Timestamp,
    pub received_at: Option<Timestamp>,
    pub headers: FipaHeaders,
    pub scope: MessageScope,
}

impl MessageEvent {
    /// Agent on the profiled platform that sent this message, if any.
    pub fn internal_sender(&self) -> Option<&str> {
        (!self.sender.is_external).then_some(self.sender.agent_id.as_str())
    }

    /// Agent on the profiled platform that received this message, if it was received.
    pub fn internal_receiver(&self) -> Option<&str> {
        (!self.receiver.is_external && self.received_at.is_some())
            .then_some(self.receiver.agent_id.as_str())
    }
}

/// CPU load in hundredths of a percent, `0..=10_000`.
///
/// Stored as an integer so snapshots carry no floating point values.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Load(pub u16);

impl Load {
    pub const MAX: Load = Load(10_000);

    /// Rounds to the nearest hundredth and clamps into `[0, 100]`. NaN maps to 0.
    pub fn from_pct(pct: f64) -> Load {
        if pct.is_nan() {
            return Load(0);
        }
        Load((pct.clamp(0.0, 100.0) * 100.0).round() as u16)
    }

    pub fn pct(self) -> f64 {
        f64::from(self.0) / 100.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CpuSample {
    pub at: Timestamp,
    pub load: Load,
}

impl CpuSample {
    pub fn load_pct(&self) -> f64 {
        self.load.pct()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Lifecycle,
    Iteration,
    Simple,
    Message,
    Cpu,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    Lifecycle(LifecycleEvent),
    Iteration(IterationEvent),
    Simple(SimpleEvent),
    Message(MessageEvent),
    Cpu(CpuSample),
}

impl TraceEvent {
    /// Ordering key: lifecycle/simple/cpu `at`, iteration `start`, message `sent_at`.
    pub fn timestamp(&self) -> Timestamp {
        match self {
            TraceEvent::Lifecycle(e) => e.at,
            TraceEvent::Iteration(e) => e.start,
            TraceEvent::Simple(e) => e.at,
            TraceEvent::Message(e) => e.sent_at,
            TraceEvent::Cpu(e) => e.at,
        }
    }

    pub fn kind(&self) -> EventKind {
        match self {
            TraceEvent::Lifecycle(_) => EventKind::Lifecycle,
            TraceEvent::Iteration(_) => EventKind::Iteration,
            TraceEvent::Simple(_) => EventKind::Simple,
            TraceEvent::Message(_) => EventKind::Message,
            TraceEvent::Cpu(_) => EventKind::Cpu,
        }
    }

    /// Subject agent for single-agent events; `None` for messages and CPU samples.
    pub fn agent_id(&self) -> Option<&str> {
        match self {
            TraceEvent::Lifecycle(e) => Some(&e.agent_id),
            TraceEvent::Iteration(e) => Some(&e.agent_id),
            TraceEvent::Simple(e) => Some(&e.agent_id),
            TraceEvent::Message(_) | TraceEvent::Cpu(_) => None,
        }
    }

    /// True if `agent_id` is the subject of the event or an internal message endpoint.
    pub fn involves(&self, agent_id: &str) -> bool {
        match self {
            TraceEvent::Message(m) => {
                (!m.sender.is_external && m.sender.agent_id == agent_id)
                    || (!m.receiver.is_external && m.receiver.agent_id == agent_id)
            }
            other => other.agent_id() == Some(agent_id),
        }
    }

    /// Half-open occupied span `[start, end)`.
    ///
    /// Point events occupy their millisecond. Messages span from send to receipt.
    pub fn span(&self) -> (i64, i64) {
        match self {
            TraceEvent::Iteration(e) if e.duration_ms > 0 => (e.start.0, e.end().0),
            TraceEvent::Message(m) => {
                let recv = m.received_at.map_or(m.sent_at.0, |r| r.0.max(m.sent_at.0));
                (m.sent_at.0, recv + 1)
            }
            other => {
                let t = other.timestamp().0;
                (t, t + 1)
            }
        }
    }
}

/// An event plus the monotone sequence number assigned by the sink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeqEvent {
    pub seq: u64,
    pub event: TraceEvent,
}

impl SeqEvent {
    pub fn sort_key(&self) -> (Timestamp, u64) {
        (self.event.timestamp(), self.seq)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("timestamp {at} outside session range [0, {duration_ms}]")]
    TimestampOutOfRange { at: i64, duration_ms: i64 },
    #[error("negative duration {0} ms")]
    NegativeDuration(i64),
    #[error("lifecycle order violation for `{agent_id}`: {detail}")]
    LifecycleOrderViolation { agent_id: String, detail: String },
    #[error("message `{message_id}` received at {received_at} before it was sent at {sent_at}")]
    ReceivedBeforeSent {
        message_id: String,
        sent_at: i64,
        received_at: i64,
    },
    #[error("breakdown sums to {breakdown} ms but iteration lasted {duration_ms} ms")]
    BreakdownMismatch { breakdown: i64, duration_ms: i64 },
    #[error("message `{0}` scope does not match its endpoints")]
    ScopeMismatch(String),
    #[error("load {0} hundredths of a percent is outside [0, 100] percent")]
    LoadOutOfRange(u16),
    #[error("cpu sample at {at} does not follow previous sample at {previous}")]
    CpuSampleNotIncreasing { at: i64, previous: i64 },
    #[error("required field `{0}` is empty")]
    EmptyField(&'static str),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct AgentLife {
    created_at: Option<i64>,
    destroyed_at: Option<i64>,
}

/// Registered agents and the lifecycle facts needed to validate later events.
#[derive(Debug, Clone, Default)]
pub struct AgentRegistry {
    agents: HashMap<String, AgentLife>,
    last_cpu_at: Option<i64>,
}

impl AgentRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_descriptors<'a>(agents: impl IntoIterator<Item = &'a AgentDescriptor>) -> Self {
        let mut reg = Self::new();
        for a in agents {
            reg.register(&a.agent_id);
        }
        reg
    }

    /// Returns false if the agent was already known.
    pub fn register(&mut self, agent_id: &str) -> bool {
        if self.agents.contains_key(agent_id) {
            return false;
        }
        self.agents.insert(agent_id.to_owned(), AgentLife::default());
        true
    }

    pub fn contains(&self, agent_id: &str) -> bool {
        self.agents.contains_key(agent_id)
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    /// Folds an already validated event into the lifecycle state.
    pub fn observe(&mut self, event: &TraceEvent) {
        match event {
            TraceEvent::Lifecycle(e) => {
                if let Some(life) = self.agents.get_mut(&e.agent_id) {
                    match e.kind {
                        LifecycleKind::Created => life.created_at = Some(e.at.0),
                        LifecycleKind::Destroyed => life.destroyed_at = Some(e.at.0),
                        _ => {}
                    }
                }
            }
            TraceEvent::Cpu(s) => self.last_cpu_at = Some(s.at.0),
            _ => {}
        }
    }

    fn life(&self, agent_id: &str) -> Result<AgentLife, ValidationError> {
        self.agents
            .get(agent_id)
            .copied()
            .ok_or_else(|| ValidationError::UnknownAgent(agent_id.to_owned()))
    }

    fn check_alive_at(&self, agent_id: &str, at: i64) -> Result<(), ValidationError> {
        let life = self.life(agent_id)?;
        match life.destroyed_at {
            Some(d) if at > d => Err(ValidationError::LifecycleOrderViolation {
                agent_id: agent_id.to_owned(),
                detail: format!("event at {at} ms follows destruction at {d} ms"),
            }),
            _ => Ok(()),
        }
    }
}

fn check_in_session(at: i64, session: &SessionInfo) -> Result<(), ValidationError> {
    if at < 0 || at > session.duration_ms {
        return Err(ValidationError::TimestampOutOfRange {
            at,
            duration_ms: session.duration_ms,
        });
    }
    Ok(())
}

fn check_endpoint(ep: &Endpoint, session: &SessionInfo) -> Result<(), ValidationError> {
    if ep.platform_id.is_empty() {
        return Err(ValidationError::EmptyField("platform_id"));
    }
    if ep.agent_id.is_empty() {
        return Err(ValidationError::EmptyField("agent_id"));
    }
    if ep.is_external == (ep.platform_id == session.platform_name) {
        return Err(ValidationError::ScopeMismatch(format!(
            "endpoint {}@{} has is_external={}",
            ep.agent_id, ep.platform_id, ep.is_external
        )));
    }
    Ok(())
}

/// Checks `event` against the type invariants, the session bounds and the
/// registry's lifecycle state. Does not mutate anything.
pub fn validate_event(
    event: &TraceEvent,
    session: &SessionInfo,
    registry: &AgentRegistry,
) -> Result<(), ValidationError> {
    match event {
        TraceEvent::Lifecycle(e) => {
            check_in_session(e.at.0, session)?;
            let life = registry.life(&e.agent_id)?;
            let violation = |detail: String| ValidationError::LifecycleOrderViolation {
                agent_id: e.agent_id.clone(),
                detail,
            };
            if let Some(d) = life.destroyed_at {
                return Err(violation(format!(
                    "`{}` after destruction at {d} ms",
                    e.kind.as_str()
                )));
            }
            match (e.kind, life.created_at) {
                (LifecycleKind::Created, Some(c)) => {
                    Err(violation(format!("created again (first at {c} ms)")))
                }
                (LifecycleKind::Created, None) => Ok(()),
                (kind, None) => Err(violation(format!("`{}` before `created`", kind.as_str()))),
                (kind, Some(c)) if e.at.0 < c => Err(violation(format!(
                    "`{}` at {} ms precedes creation at {c} ms",
                    kind.as_str(),
                    e.at.0
                ))),
                _ => Ok(()),
            }
        }
        TraceEvent::Iteration(e) => {
            if e.duration_ms < 0 {
                return Err(ValidationError::NegativeDuration(e.duration_ms));
            }
            check_in_session(e.start.0, session)?;
            check_in_session(e.end().0, session)?;
            if let Some(b) = &e.breakdown {
                for part in [b.perception_ms, b.reasoning_ms, b.action_ms] {
                    if part < 0 {
                        return Err(ValidationError::NegativeDuration(part));
                    }
                }
                if b.total() != e.duration_ms {
                    return Err(ValidationError::BreakdownMismatch {
                        breakdown: b.total(),
                        duration_ms: e.duration_ms,
                    });
                }
            }
            registry.check_alive_at(&e.agent_id, e.start.0)
        }
        TraceEvent::Simple(e) => {
            if e.kind.is_empty() {
                return Err(ValidationError::EmptyField("kind"));
            }
            check_in_session(e.at.0, session)?;
            registry.check_alive_at(&e.agent_id, e.at.0)
        }
        TraceEvent::Message(m) => {
            if m.message_id.is_empty() {
                return Err(ValidationError::EmptyField("message_id"));
            }
            if m.headers.performative.is_empty() {
                return Err(ValidationError::EmptyField("performative"));
            }
            check_in_session(m.sent_at.0, session)?;
            if let Some(r) = m.received_at {
                if r < m.sent_at {
                    return Err(ValidationError::ReceivedBeforeSent {
                        message_id: m.message_id.clone(),
                        sent_at: m.sent_at.0,
                        received_at: r.0,
                    });
                }
                check_in_session(r.0, session)?;
            }
            check_endpoint(&m.sender, session)?;
            check_endpoint(&m.receiver, session)?;
            let expected = match (m.sender.is_external, m.receiver.is_external) {
                (false, false) => MessageScope::IntraPlatform,
                (true, false) | (false, true) => MessageScope::InterPlatform,
                (true, true) => return Err(ValidationError::ScopeMismatch(m.message_id.clone())),
            };
            if m.scope != expected {
                return Err(ValidationError::ScopeMismatch(m.message_id.clone()));
            }
            if !m.sender.is_external {
                registry.check_alive_at(&m.sender.agent_id, m.sent_at.0)?;
            }
            if !m.receiver.is_external {
                registry.check_alive_at(
                    &m.receiver.agent_id,
                    m.received_at.unwrap_or(m.sent_at).0,
                )?;
            }
            Ok(())
        }
        TraceEvent::Cpu(s) => {
            if s.load > Load::MAX {
                return Err(ValidationError::LoadOutOfRange(s.load.0));
            }
            check_in_session(s.at.0, session)?;
            match registry.last_cpu_at {
                Some(prev) if s.at.0 <= prev => Err(ValidationError::CpuSampleNotIncreasing {
                    at: s.at.0,
                    previous: prev,
                }),
                _ => Ok(()),
            }
        }
    }
}
