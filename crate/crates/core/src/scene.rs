//! Space-time diagram scene compiler.
//!
//! [`compile_scene`] turns a snapshot and a [`Viewport`] into plain geometry:
//! a time axis, a CPU strip, one lane per agent, duration-proportional
//! rectangles, glyphs for timestamp-only events, message arcs, external
//! platform lines and a bird's-eye overview. Nothing here draws; renderers
//! consume the structure (z-order: lanes < rects < glyphs < arcs).
//!
//! x coordinates are `(t - viewport.t0) * px_per_ms`. Lanes come first in y,
//! external platform lines follow them.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::exec::{self, Exec};
use crate::model::{LifecycleKind, SeqEvent, TraceEvent};
use crate::overshoot::{self, SliceClass};
use crate::query::{self, effective_end};
use crate::report::format_ms;
use crate::snapshot::Snapshot;

/// Narrowest rectangle a renderer is asked to draw.
pub const MIN_RECT_PX: f64 = 1.0;
pub const DEFAULT_BIRDS_EYE_BUCKETS: u32 = 256;
const TARGET_TICKS: i64 = 10;

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("invalid viewport: {0}")]
    InvalidViewport(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum LaneOrder {
    #[default]
    Auto,
    /// Listed agents first, in this order; the rest follow in auto order.
    Explicit(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Viewport {
    pub t0: i64,
    pub t1: i64,
    pub px_per_ms: f64,
    pub lane_order: LaneOrder,
    pub hidden: BTreeSet<String>,
}

impl Viewport {
    pub fn new(t0: i64, t1: i64, px_per_ms: f64) -> Self {
        Viewport {
            t0,
            t1,
            px_per_ms,
            lane_order: LaneOrder::Auto,
            hidden: BTreeSet::new(),
        }
    }

    pub fn full(snapshot: &Snapshot, px_per_ms: f64) -> Self {
        Viewport::new(0, snapshot.manifest.duration_ms, px_per_ms)
    }

    pub fn validate(&self, session_ms: i64) -> Result<(), SceneError> {
        if self.t0 < 0 || self.t1 > session_ms {
            return Err(SceneError::InvalidViewport(format!(
                "[{}, {}) is outside the session [0, {session_ms}]",
                self.t0, self.t1
            )));
        }
        if self.t0 >= self.t1 {
            return Err(SceneError::InvalidViewport(format!(
                "t0 ({}) must be below t1 ({})",
                self.t0, self.t1
            )));
        }
        if !(self.px_per_ms.is_finite() && self.px_per_ms > 0.0) {
            return Err(SceneError::InvalidViewport(format!(
                "px_per_ms must be positive, got {}",
                self.px_per_ms
            )));
        }
        Ok(())
    }

    fn x(&self, t: i64) -> f64 {
        (t - self.t0) as f64 * self.px_per_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tick {
    pub t_ms: i64,
    pub x: f64,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CpuColor {
    /// 120 is the green anchor, 0 the red anchor.
    pub hue_deg: f64,
    pub rgb: [u8; 3],
}

/// Green to red hue ramp for the CPU strip. Input is clamped to `[0, 100]`.
pub fn cpu_color(load_pct: f64) -> CpuColor {
    let load = if load_pct.is_nan() { 0.0 } else { load_pct.clamp(0.0, 100.0) };
    let hue = 120.0 * (1.0 - load / 100.0);
    let channel = |v: f64| (v * 255.0).round() as u8;
    let rgb = if hue >= 60.0 {
        [channel((120.0 - hue) / 60.0), 255, 0]
    } else {
        [255, channel(hue / 60.0), 0]
    };
    CpuColor { hue_deg: hue, rgb }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpuSegment {
    pub t_start: i64,
    pub t_end: i64,
    pub x0: f64,
    pub x1: f64,
    pub load_pct: f64,
    pub color: CpuColor,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lane {
    pub agent_id: String,
    pub caption: String,
    /// Share of the busiest agent's activity, `[0, 1]`.
    pub darkness: f64,
    pub y_index: u32,
    pub activity_ms: i64,
    /// Creation time; the time line starts here.
    pub begins_at_ms: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rect {
    pub lane: u32,
    pub x0: f64,
    /// `x0 + max(width_px, MIN_RECT_PX)`.
    pub x1: f64,
    /// Unclamped `duration_ms * px_per_ms`.
    pub width_px: f64,
    pub start_ms: i64,
    pub duration_ms: i64,
    pub color: SliceClass,
    pub event_ref: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IconKind {
    Envelope,
    Created,
    Started,
    Stopped,
    Suspended,
    Resumed,
    Destroyed,
    Flag,
    Warning,
    Generic,
}

impl IconKind {
    /// Built-in glyphs for simple event kinds; anything else is generic.
    pub fn for_simple_kind(kind: &str) -> IconKind {
        match kind {
            "message-received" | "envelope" => IconKind::Envelope,
            "milestone" | "flag" => IconKind::Flag,
            "warning" | "error" => IconKind::Warning,
            _ => IconKind::Generic,
        }
    }

    fn for_lifecycle(kind: LifecycleKind) -> IconKind {
        match kind {
            LifecycleKind::Created => IconKind::Created,
            LifecycleKind::Started => IconKind::Started,
            LifecycleKind::Stopped => IconKind::Stopped,
            LifecycleKind::Suspended => IconKind::Suspended,
            LifecycleKind::Resumed => IconKind::Resumed,
            LifecycleKind::Destroyed => IconKind::Destroyed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Glyph {
    pub lane: u32,
    pub x: f64,
    pub at_ms: i64,
    pub icon: IconKind,
    pub event_ref: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcEnd {
    Lane(u32),
    /// Index into [`SceneDescription::external_lines`].
    External(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcDirection {
    Down,
    Up,
    Level,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MessageArc {
    pub from: ArcEnd,
    pub to: ArcEnd,
    pub x_send: f64,
    /// `None` for messages still pending at session end.
    pub x_receive: Option<f64>,
    pub message_id: String,
    pub direction: ArcDirection,
    pub pending: bool,
    pub event_ref: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExternalLine {
    pub platform_id: String,
    pub y_index: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Cell {
    #[default]
    Empty,
    Class(SliceClass),
}

impl Cell {
    fn as_char(self) -> char {
        match self {
            Cell::Empty => '.',
            Cell::Class(c) => c.as_char(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BirdsEyeLane {
    pub agent_id: String,
    pub cells: Vec<Cell>,
}

impl BirdsEyeLane {
    /// One character per bucket: `.` empty, `g`/`o`/`r` worst class.
    pub fn cells_string(&self) -> String {
        self.cells.iter().map(|c| c.as_char()).collect()
    }
}

/// Whole-session overview with `buckets` columns tiling `[0, session_ms)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BirdsEye {
    pub buckets: u32,
    pub session_ms: i64,
    pub lanes: Vec<BirdsEyeLane>,
}

impl BirdsEye {
    /// Start of bucket `i`; `bucket_start(buckets) == session_ms`.
    pub fn bucket_start(&self, i: u32) -> i64 {
        bucket_bound(i, self.buckets, self.session_ms)
    }

    pub fn bucket_span(&self, i: u32) -> (i64, i64) {
        (self.bucket_start(i), self.bucket_start(i + 1))
    }

    /// Bucket containing instant `t`, clamped into range.
    pub fn bucket_of(&self, t: i64) -> u32 {
        bucket_of(t, self.buckets, self.session_ms)
    }

    /// Buckets covered by the viewport `[t0, t1)`, inclusive.
    pub fn viewport_buckets(&self, t0: i64, t1: i64) -> (u32, u32) {
        (self.bucket_of(t0), self.bucket_of((t1 - 1).max(t0)))
    }
}

fn bucket_bound(i: u32, buckets: u32, session_ms: i64) -> i64 {
    (i128::from(i) * i128::from(session_ms) / i128::from(buckets.max(1))) as i64
}

fn bucket_of(t: i64, buckets: u32, session_ms: i64) -> u32 {
    if session_ms <= 0 || buckets == 0 {
        return 0;
    }
    let t = t.clamp(0, session_ms - 1);
    // Largest i with floor(i * T / W) <= t.
    let w = i128::from(buckets);
    let i = ((i128::from(t) + 1) * w + i128::from(session_ms) - 1) / i128::from(session_ms) - 1;
    i.clamp(0, w - 1) as u32
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneHeader {
    pub t0: i64,
    pub t1: i64,
    pub px_per_ms: f64,
    pub width_px: f64,
    pub session_ms: i64,
    pub slice_ms: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneDescription {
    pub header: SceneHeader,
    pub time_axis: Vec<Tick>,
    pub cpu_strip: Vec<CpuSegment>,
    pub lanes: Vec<Lane>,
    pub external_lines: Vec<ExternalLine>,
    pub rects: Vec<Rect>,
    pub glyphs: Vec<Glyph>,
    pub arcs: Vec<MessageArc>,
    pub birds_eye: BirdsEye,
}

/// Same color contract as the simulator's task classification.
pub fn classify_rect(duration_ms: i64, slice_ms: i64) -> SliceClass {
    overshoot::classify(duration_ms, slice_ms)
}

fn tick_step(span_ms: i64) -> i64 {
    let raw = (span_ms / TARGET_TICKS).max(1);
    let mut magnitude = 1i64;
    loop {
        for m in [1, 2, 5] {
            if m * magnitude >= raw {
                return m * magnitude;
            }
        }
        magnitude *= 10;
    }
}

fn time_axis(vp: &Viewport) -> Vec<Tick> {
    let step = tick_step(vp.t1 - vp.t0);
    let first = (vp.t0 + step - 1) / step * step;
    (0..)
        .map(|k| first + k * step)
        .take_while(|&t| t <= vp.t1)
        .map(|t| Tick {
            t_ms: t,
            x: vp.x(t),
            label: format_ms(t),
        })
        .collect()
}

fn cpu_strip(snapshot: &Snapshot, vp: &Viewport, end: i64) -> Vec<CpuSegment> {
    let mut prev = 0;
    let mut out = Vec::new();
    for ev in &snapshot.events {
        if let TraceEvent::Cpu(s) = &ev.event {
            let (start, stop) = (prev, s.at.0);
            prev = s.at.0;
            if stop <= start || start >= end || stop <= vp.t0 {
                continue;
            }
            let load = s.load.pct();
            out.push(CpuSegment {
                t_start: start,
                t_end: stop,
                x0: vp.x(start),
                x1: vp.x(stop),
                load_pct: load,
                color: cpu_color(load),
            });
        }
    }
    out
}

/// Lane order for a snapshot: flat-profile order, explicit overrides first,
/// hidden agents removed.
fn lane_plan(snapshot: &Snapshot, vp: &Viewport, exec: Exec) -> Vec<Lane> {
    let profile = query::flat_profile_with(snapshot, exec);
    let max_activity = profile.rows.iter().map(|r| r.activity_ms).max().unwrap_or(0);
    let mut rows: Vec<_> = profile.rows.iter().collect();
    if let LaneOrder::Explicit(order) = &vp.lane_order {
        let rank: HashMap<&str, usize> = order
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        // stable: unlisted rows keep auto order after the listed ones
        rows.sort_by_key(|r| rank.get(r.agent_id.as_str()).copied().unwrap_or(usize::MAX));
    }
    let mut created: HashMap<&str, i64> = HashMap::new();
    for ev in &snapshot.events {
        let t = ev.event.timestamp().0;
        match &ev.event {
            TraceEvent::Lifecycle(l) if l.kind == LifecycleKind::Created => {
                created.insert(l.agent_id.as_str(), t);
            }
            TraceEvent::Message(m) => {
                for ep in [&m.sender, &m.receiver] {
                    if !ep.is_external {
                        created.entry(ep.agent_id.as_str()).or_insert(t);
                    }
                }
            }
            other => {
                if let Some(id) = other.agent_id() {
                    created.entry(id).or_insert(t);
                }
            }
        }
    }
    rows.into_iter()
        .filter(|r| !vp.hidden.contains(&r.agent_id))
        .enumerate()
        .map(|(y, r)| Lane {
            agent_id: r.agent_id.clone(),
            caption: r.name.clone(),
            darkness: if max_activity > 0 {
                r.activity_ms as f64 / max_activity as f64
            } else {
                0.0
            },
            y_index: y as u32,
            activity_ms: r.activity_ms,
            begins_at_ms: created.get(r.agent_id.as_str()).copied().unwrap_or(0),
        })
        .collect()
}

enum Primitive {
    Rect(Rect),
    Glyph(Glyph),
    Message(Option<Glyph>, Option<MessageArc>),
}

pub fn compile_scene(snapshot: &Snapshot, viewport: &Viewport) -> Result<SceneDescription, SceneError> {
    compile_scene_with(snapshot, viewport, Exec::default())
}

pub fn compile_scene_with(
    snapshot: &Snapshot,
    viewport: &Viewport,
    exec: Exec,
) -> Result<SceneDescription, SceneError> {
    let session_ms = snapshot.manifest.duration_ms;
    let slice_ms = snapshot.manifest.slice_ms;
    viewport.validate(session_ms)?;
    let vp = viewport;
    let end = effective_end(vp.t1, session_ms);

    let lanes = lane_plan(snapshot, vp, exec);
    let lane_of: HashMap<&str, u32> = lanes
        .iter()
        .map(|l| (l.agent_id.as_str(), l.y_index))
        .collect();

    let platforms: BTreeSet<&str> = snapshot
        .events
        .iter()
        .filter_map(|ev| match &ev.event {
            TraceEvent::Message(m) => Some([&m.sender, &m.receiver]),
            _ => None,
        })
        .flatten()
        .filter(|ep| ep.is_external)
        .map(|ep| ep.platform_id.as_str())
        .collect();
    let external_lines: Vec<ExternalLine> = platforms
        .iter()
        .enumerate()
        .map(|(i, p)| ExternalLine {
            platform_id: (*p).to_owned(),
            y_index: (lanes.len() + i) as u32,
        })
        .collect();
    let external_of: HashMap<&str, u32> = platforms
        .iter()
        .enumerate()
        .map(|(i, p)| (*p, i as u32))
        .collect();
    let y_of = |end: ArcEnd| match end {
        ArcEnd::Lane(y) => y,
        ArcEnd::External(i) => external_lines[i as usize].y_index,
    };
    let in_view = |t: i64| t >= vp.t0 && t < end;

    let primitives = exec::filter_map(&snapshot.events, exec, |ev: &SeqEvent| {
        let (s, e) = ev.event.span();
        if s >= end || e <= vp.t0 {
            return None;
        }
        match &ev.event {
            TraceEvent::Iteration(it) => {
                if it.duration_ms <= 0 {
                    return None;
                }
                let lane = *lane_of.get(it.agent_id.as_str())?;
                let x0 = vp.x(it.start.0);
                let width = it.duration_ms as f64 * vp.px_per_ms;
                Some(Primitive::Rect(Rect {
                    lane,
                    x0,
                    x1: x0 + width.max(MIN_RECT_PX),
                    width_px: width,
                    start_ms: it.start.0,
                    duration_ms: it.duration_ms,
                    color: classify_rect(it.duration_ms, slice_ms),
                    event_ref: ev.seq,
                }))
            }
            TraceEvent::Lifecycle(l) => Some(Primitive::Glyph(Glyph {
                lane: *lane_of.get(l.agent_id.as_str())?,
                x: vp.x(l.at.0),
                at_ms: l.at.0,
                icon: IconKind::for_lifecycle(l.kind),
                event_ref: ev.seq,
            })),
            TraceEvent::Simple(se) => Some(Primitive::Glyph(Glyph {
                lane: *lane_of.get(se.agent_id.as_str())?,
                x: vp.x(se.at.0),
                at_ms: se.at.0,
                icon: IconKind::for_simple_kind(&se.kind),
                event_ref: ev.seq,
            })),
            TraceEvent::Message(m) => {
                // Hidden or lane-less internal agents drop the arc entirely.
                let route = |ep: &crate::model::Endpoint| {
                    if ep.is_external {
                        external_of.get(ep.platform_id.as_str()).map(|&i| ArcEnd::External(i))
                    } else {
                        lane_of.get(ep.agent_id.as_str()).map(|&y| ArcEnd::Lane(y))
                    }
                };
                let envelope = match (m.received_at, route(&m.receiver)) {
                    (Some(r), Some(ArcEnd::Lane(y))) if in_view(r.0) => Some(Glyph {
                        lane: y,
                        x: vp.x(r.0),
                        at_ms: r.0,
                        icon: IconKind::Envelope,
                        event_ref: ev.seq,
                    }),
                    _ => None,
                };
                let arc = match (route(&m.sender), route(&m.receiver)) {
                    (Some(from), Some(to)) => {
                        let (yf, yt) = (y_of(from), y_of(to));
                        Some(MessageArc {
                            from,
                            to,
                            x_send: vp.x(m.sent_at.0),
                            x_receive: m.received_at.map(|r| vp.x(r.0)),
                            message_id: m.message_id.clone(),
                            direction: match yt.cmp(&yf) {
                                std::cmp::Ordering::Greater => ArcDirection::Down,
                                std::cmp::Ordering::Less => ArcDirection::Up,
                                std::cmp::Ordering::Equal => ArcDirection::Level,
                            },
                            pending: m.received_at.is_none(),
                            event_ref: ev.seq,
                        })
                    }
                    _ => None,
                };
                if envelope.is_none() && arc.is_none() {
                    return None;
                }
                Some(Primitive::Message(envelope, arc))
            }
            TraceEvent::Cpu(_) => None,
        }
    });

    let mut rects = Vec::new();
    let mut glyphs = Vec::new();
    let mut arcs = Vec::new();
    for p in primitives {
        match p {
            Primitive::Rect(r) => rects.push(r),
            Primitive::Glyph(g) => glyphs.push(g),
            Primitive::Message(envelope, arc) => {
                glyphs.extend(envelope);
                arcs.extend(arc);
            }
        }
    }

    let visible: Vec<&str> = lanes.iter().map(|l| l.agent_id.as_str()).collect();
    let birds_eye = birds_eye_for(snapshot, &visible, DEFAULT_BIRDS_EYE_BUCKETS, exec);

    Ok(SceneDescription {
        header: SceneHeader {
            t0: vp.t0,
            t1: vp.t1,
            px_per_ms: vp.px_per_ms,
            width_px: vp.x(vp.t1),
            session_ms,
            slice_ms,
        },
        time_axis: time_axis(vp),
        cpu_strip: cpu_strip(snapshot, vp, end),
        lanes,
        external_lines,
        rects,
        glyphs,
        arcs,
        birds_eye,
    })
}

/// Overview over all agents in flat-profile order.
pub fn birds_eye(snapshot: &Snapshot, width_buckets: u32) -> BirdsEye {
    birds_eye_with(snapshot, width_buckets, Exec::default())
}

pub fn birds_eye_with(snapshot: &Snapshot, width_buckets: u32, exec: Exec) -> BirdsEye {
    let profile = query::flat_profile_with(snapshot, exec);
    let ids: Vec<&str> = profile.rows.iter().map(|r| r.agent_id.as_str()).collect();
    birds_eye_for(snapshot, &ids, width_buckets, exec)
}

fn birds_eye_for(snapshot: &Snapshot, lane_ids: &[&str], width_buckets: u32, exec: Exec) -> BirdsEye {
    let buckets = width_buckets.max(1);
    let session_ms = snapshot.manifest.duration_ms;
    let slice_ms = snapshot.manifest.slice_ms;
    let lane_of: HashMap<&str, usize> = lane_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let w = buckets as usize;
    let n = lane_ids.len();
    let grid = exec::fold_reduce(
        &snapshot.events,
        exec,
        || vec![Cell::Empty; n * w],
        |mut grid, ev: &SeqEvent| {
            if let TraceEvent::Iteration(it) = &ev.event {
                if it.duration_ms > 0 && session_ms > 0 {
                    if let Some(&lane) = lane_of.get(it.agent_id.as_str()) {
                        let cell = Cell::Class(overshoot::classify(it.duration_ms, slice_ms));
                        let first = bucket_of(it.start.0, buckets, session_ms) as usize;
                        let last = bucket_of(it.end().0 - 1, buckets, session_ms) as usize;
                        for b in first..=last {
                            let slot = &mut grid[lane * w + b];
                            *slot = (*slot).max(cell);
                        }
                    }
                }
            }
            grid
        },
        |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                *x = (*x).max(y);
            }
            a
        },
    );
    BirdsEye {
        buckets,
        session_ms,
        lanes: lane_ids
            .iter()
            .enumerate()
            .map(|(i, id)| BirdsEyeLane {
                agent_id: (*id).to_owned(),
                cells: grid[i * w..(i + 1) * w].to_vec(),
            })
            .collect(),
    }
}

#[derive(Serialize)]
struct BirdsEyeHeader<'a> {
    buckets: u32,
    session_ms: i64,
    viewport_first: Option<u32>,
    viewport_last: Option<u32>,
    #[serde(skip)]
    _p: std::marker::PhantomData<&'a ()>,
}

#[derive(Serialize)]
struct BirdsEyeLaneRecord<'a> {
    agent_id: &'a str,
    cells: String,
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum SceneRecord<'a> {
    Scene(&'a SceneHeader),
    Tick(&'a Tick),
    Cpu(&'a CpuSegment),
    Lane(&'a Lane),
    ExternalLine(&'a ExternalLine),
    Rect(&'a Rect),
    Glyph(&'a Glyph),
    Arc(&'a MessageArc),
    BirdsEye(BirdsEyeHeader<'a>),
    BirdsEyeLane(BirdsEyeLaneRecord<'a>),
}

fn push_line(out: &mut String, record: &SceneRecord<'_>) {
    out.push_str(&serde_json::to_string(record).expect("scene records serialize"));
    out.push('\n');
}

/// Canonical line-per-record serialization of a bird's-eye overview.
pub fn birds_eye_canonical(be: &BirdsEye, viewport: Option<(i64, i64)>) -> String {
    let mut out = String::new();
    let (first, last) = match viewport {
        Some((t0, t1)) => {
            let (a, b) = be.viewport_buckets(t0, t1);
            (Some(a), Some(b))
        }
        None => (None, None),
    };
    push_line(
        &mut out,
        &SceneRecord::BirdsEye(BirdsEyeHeader {
            buckets: be.buckets,
            session_ms: be.session_ms,
            viewport_first: first,
            viewport_last: last,
            _p: std::marker::PhantomData,
        }),
    );
    for lane in &be.lanes {
        push_line(
            &mut out,
            &SceneRecord::BirdsEyeLane(BirdsEyeLaneRecord {
                agent_id: &lane.agent_id,
                cells: lane.cells_string(),
            }),
        );
    }
    out
}

impl SceneDescription {
    /// Canonical serialization: one JSON record per line, in z-order.
    pub fn to_canonical(&self) -> String {
        let mut out = String::new();
        push_line(&mut out, &SceneRecord::Scene(&self.header));
        for t in &self.time_axis {
            push_line(&mut out, &SceneRecord::Tick(t));
        }
        for c in &self.cpu_strip {
            push_line(&mut out, &SceneRecord::Cpu(c));
        }
        for l in &self.lanes {
            push_line(&mut out, &SceneRecord::Lane(l));
        }
        for e in &self.external_lines {
            push_line(&mut out, &SceneRecord::ExternalLine(e));
        }
        for r in &self.rects {
            push_line(&mut out, &SceneRecord::Rect(r));
        }
        for g in &self.glyphs {
            push_line(&mut out, &SceneRecord::Glyph(g));
        }
        for a in &self.arcs {
            push_line(&mut out, &SceneRecord::Arc(a));
        }
        out.push_str(&birds_eye_canonical(
            &self.birds_eye,
            Some((self.header.t0, self.header.t1)),
        ));
        out
    }
}
