//! Deterministic benchmark platform.
//!
//! Overseer agents order small, medium and large tasks from worker agents.
//! A sequential time-slice scheduler grants every live agent one iteration
//! per round, in a fixed order (overseers, then workers by creation). Workers
//! that recently overran their slice refuse new tasks for a few iterations,
//! and occasionally act as overseers and forward their tasks instead of
//! running them. Everything is reported through a [`ProfilerSink`].
//!
//! All randomness comes from one seeded ChaCha stream, so a spec and a
//! virtual clock always yield the same snapshot bytes.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instrument::{BusyLedger, Clock, ProfilerSink, SinkError, SnapshotHandle, VirtualClock};
use crate::model::{
    AgentDescriptor, Breakdown, Endpoint, FipaHeaders, IterationEvent, LifecycleEvent,
    LifecycleKind, MessageEvent, MessageScope, Rationality, SimpleEvent, Timestamp, TraceEvent,
};

pub const OVERSEER_ROLE: &str = "overseer";
pub const WORKER_ROLE: &str = "worker";
/// Platform id used for the synthetic remote endpoint.
pub const REMOTE_PLATFORM: &str = "remote-platform";

/// Wall-clock origin stamped on virtual-time captures.
pub fn virtual_origin() -> DateTime<Utc> {
    DateTime::UNIX_EPOCH
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Sink(#[from] SinkError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSize {
    pub mean_ms: f64,
    pub stddev_ms: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskMix {
    pub small: TaskSize,
    pub medium: TaskSize,
    pub large: TaskSize,
}

impl TaskMix {
    fn sizes(&self) -> [(&'static str, TaskSize); 3] {
        [("small", self.small), ("medium", self.medium), ("large", self.large)]
    }
}

impl Default for TaskMix {
    fn default() -> Self {
        TaskMix {
            small: TaskSize { mean_ms: 100.0, stddev_ms: 30.0, weight: 0.55 },
            medium: TaskSize { mean_ms: 550.0, stddev_ms: 10.0, weight: 0.35 },
            large: TaskSize { mean_ms: 3300.0, stddev_ms: 200.0, weight: 0.10 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cost {
    pub mean_ms: f64,
    pub stddev_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum PhaseAction {
    /// Grow or shrink the worker population. Shrinking destroys the newest workers.
    SetWorkers { workers: u32 },
    /// Suspend every agent; no iterations run until `duration_ms` later.
    Pause { duration_ms: i64 },
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase {
    pub at_ms: i64,
    #[serde(flatten)]
    pub action: PhaseAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub platform_name: String,
    pub slice_ms: i64,
    pub initial_workers: u32,
    pub overseers: u32,
    /// Chance that an overseer orders a task in a given round.
    pub request_prob: f64,
    /// Chance that a round is a burst: every overseer orders the same task
    /// from the same worker.
    pub burst_prob: f64,
    pub delegation_prob: f64,
    pub refusal_cooldown_iterations: u32,
    pub inter_platform_fraction: f64,
    pub overseer_cost: Cost,
    pub task_mix: TaskMix,
    pub phases: Vec<Phase>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            seed: 0,
            platform_name: "benchmark".into(),
            slice_ms: 1000,
            initial_workers: 0,
            overseers: 1,
            request_prob: 0.45,
            burst_prob: 0.02,
            delegation_prob: 0.05,
            refusal_cooldown_iterations: 5,
            inter_platform_fraction: 0.0,
            overseer_cost: Cost { mean_ms: 7.0, stddev_ms: 3.0 },
            task_mix: TaskMix::default(),
            phases: Vec::new(),
        }
    }
}

fn check_prob(name: &str, p: f64) -> Result<(), SimError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(SimError::InvalidSpec(format!("{name} must be in [0, 1], got {p}")))
    }
}

fn check_dist(name: &str, mean: f64, stddev: f64) -> Result<(), SimError> {
    if !(mean.is_finite() && mean > 0.0) {
        return Err(SimError::InvalidSpec(format!("{name}: mean_ms must be positive")));
    }
    if !(stddev.is_finite() && stddev >= 0.0) {
        return Err(SimError::InvalidSpec(format!("{name}: stddev_ms must be non-negative")));
    }
    Ok(())
}

impl ScenarioSpec {
    /// Twelve workers and two overseers for about nineteen minutes, with a
    /// population surge, a pause and a drop back.
    pub fn benchmark_default() -> Self {
        ScenarioSpec {
            seed: 20_090_601,
            initial_workers: 12,
            overseers: 2,
            phases: vec![
                Phase { at_ms: 600_000, action: PhaseAction::SetWorkers { workers: 27 } },
                Phase { at_ms: 840_000, action: PhaseAction::Pause { duration_ms: 20_000 } },
                Phase { at_ms: 860_000, action: PhaseAction::SetWorkers { workers: 12 } },
                Phase { at_ms: 1_130_691, action: PhaseAction::Stop },
            ],
            ..ScenarioSpec::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let spec: ScenarioSpec =
            toml::from_str(text).map_err(|e| SimError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario specs serialize")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let invalid = |m: String| Err(SimError::InvalidSpec(m));
        if self.platform_name.is_empty() || self.platform_name == REMOTE_PLATFORM {
            return invalid(format!("platform_name `{}` is not allowed", self.platform_name));
        }
        if self.slice_ms < 1 {
            return invalid(format!("slice_ms must be at least 1, got {}", self.slice_ms));
        }
        if self.overseers < 1 {
            return invalid("at least one overseer is required".into());
        }
        check_prob("request_prob", self.request_prob)?;
        check_prob("burst_prob", self.burst_prob)?;
        check_prob("delegation_prob", self.delegation_prob)?;
        check_prob("inter_platform_fraction", self.inter_platform_fraction)?;
        check_dist("overseer_cost", self.overseer_cost.mean_ms, self.overseer_cost.stddev_ms)?;
        for (name, size) in self.task_mix.sizes() {
            check_dist(name, size.mean_ms, size.stddev_ms)?;
            if !(size.weight.is_finite() && size.weight > 0.0) {
                return invalid(format!("{name}: weight must be positive"));
            }
        }
        let mut previous: Option<i64> = None;
        for (i, p) in self.phases.iter().enumerate() {
            if p.at_ms < 0 {
                return invalid(format!("phase {i}: at_ms must be non-negative"));
            }
            if previous.is_some_and(|prev| p.at_ms <= prev) {
                return invalid(format!("phase {i}: times must be strictly increasing"));
            }
            previous = Some(p.at_ms);
            match p.action {
                PhaseAction::Pause { duration_ms } if duration_ms <= 0 => {
                    return invalid(format!("phase {i}: pause duration must be positive"));
                }
                PhaseAction::Stop if i + 1 != self.phases.len() => {
                    return invalid(format!("phase {i}: stop must be the last phase"));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// When the session ends: the stop phase, else the last phase, else 0.
    pub fn end_ms(&self) -> i64 {
        self.phases.last().map_or(0, |p| p.at_ms)
    }

    pub fn session_id(&self) -> String {
        format!("{}-{:016x}", self.platform_name, self.seed)
    }
}

pub fn worker_id(index: u32) -> String {
    format!("agent{:03}", index + 1)
}

pub fn overseer_id(index: u32) -> String {
    format!("master{}", index + 1)
}

#[derive(Debug, Clone)]
struct Task {
    size: &'static str,
    planned_ms: i64,
}

#[derive(Debug, Clone)]
struct Pending {
    message_id: String,
    sender: Endpoint,
    sent_at: i64,
    headers: FipaHeaders,
    task: Task,
}

#[derive(Debug)]
pub struct WorkerState {
    pub agent_id: String,
    /// Iterations numbered below this value refuse work.
    pub recently_overloaded_until: u64,
    pub acting_as_overseer: bool,
    iterations: u64,
    inbox: Vec<Pending>,
}

struct Platform<'a> {
    spec: &'a ScenarioSpec,
    sink: &'a ProfilerSink,
    ledger: BusyLedger,
    rng: ChaCha8Rng,
    sizes: Vec<(&'static str, Normal<f64>)>,
    size_index: WeightedIndex<f64>,
    overseer_cost: Normal<f64>,
    /// Clock reading at session time 0.
    base_ms: i64,
    cursor: i64,
    next_sample: i64,
    overseers: Vec<String>,
    workers: Vec<WorkerState>,
    created_workers: u32,
    next_message: u64,
}

fn sample_ms(dist: &Normal<f64>, rng: &mut ChaCha8Rng) -> i64 {
    (dist.sample(rng).round() as i64).max(1)
}

impl<'a> Platform<'a> {
    fn new(spec: &'a ScenarioSpec, sink: &'a ProfilerSink) -> Result<Self, SimError> {
        let normal = |m: f64, s: f64| {
            Normal::new(m, s).map_err(|e| SimError::InvalidSpec(e.to_string()))
        };
        let sizes = spec
            .task_mix
            .sizes()
            .iter()
            .map(|(name, s)| Ok((*name, normal(s.mean_ms, s.stddev_ms)?)))
            .collect::<Result<Vec<_>, SimError>>()?;
        let size_index = WeightedIndex::new(spec.task_mix.sizes().map(|(_, s)| s.weight))
            .map_err(|e| SimError::InvalidSpec(e.to_string()))?;
        let base_ms = sink.clock().now_ms() - sink.now()?.0;
        let ledger = BusyLedger::new();
        sink.set_load_source(Box::new(ledger.clone()));
        Ok(Platform {
            spec,
            sink,
            ledger,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            sizes,
            size_index,
            overseer_cost: normal(spec.overseer_cost.mean_ms, spec.overseer_cost.stddev_ms)?,
            base_ms,
            cursor: 0,
            next_sample: sink.sampler_interval_ms(),
            overseers: Vec::new(),
            workers: Vec::new(),
            created_workers: 0,
            next_message: 0,
        })
    }

    /// Moves session time to `t`, taking every CPU sample due on the way.
    fn advance(&mut self, t: i64) -> Result<(), SimError> {
        let clock = self.sink.clock();
        while self.next_sample <= t {
            clock.advance_to(self.base_ms + self.next_sample);
            self.sink.sample_cpu()?;
            self.next_sample += self.sink.sampler_interval_ms();
        }
        clock.advance_to(self.base_ms + t);
        self.cursor = self.cursor.max(t);
        Ok(())
    }

    fn lifecycle(&self, agent_id: &str, kind: LifecycleKind) -> Result<(), SimError> {
        self.sink.record(TraceEvent::Lifecycle(LifecycleEvent {
            agent_id: agent_id.to_owned(),
            kind,
            at: Timestamp(self.cursor),
        }))?;
        Ok(())
    }

    fn spawn(&mut self, descriptor: AgentDescriptor) -> Result<(), SimError> {
        let id = descriptor.agent_id.clone();
        self.sink.register_agent(descriptor)?;
        self.lifecycle(&id, LifecycleKind::Created)?;
        self.lifecycle(&id, LifecycleKind::Started)
    }

    fn set_workers(&mut self, n: u32) -> Result<(), SimError> {
        while self.workers.len() < n as usize {
            let id = worker_id(self.created_workers);
            self.created_workers += 1;
            self.spawn(AgentDescriptor::new(&id, &id, WORKER_ROLE, Rationality::Reactive))?;
            self.workers.push(WorkerState {
                agent_id: id,
                recently_overloaded_until: 0,
                acting_as_overseer: false,
                iterations: 0,
                inbox: Vec::new(),
            });
        }
        while self.workers.len() > n as usize {
            let w = self.workers.pop().expect("non-empty");
            self.lifecycle(&w.agent_id, LifecycleKind::Stopped)?;
            self.lifecycle(&w.agent_id, LifecycleKind::Destroyed)?;
            for p in w.inbox {
                self.record_message(&p, &w.agent_id, None)?;
            }
        }
        Ok(())
    }

    fn all_agents(&self) -> Vec<String> {
        self.overseers
            .iter()
            .cloned()
            .chain(self.workers.iter().map(|w| w.agent_id.clone()))
            .collect()
    }

    /// Applies `phase`. The scheduler never preempts, so a phase due while an
    /// iteration runs takes effect when that iteration ends.
    fn apply(&mut self, phase: Phase) -> Result<(), SimError> {
        match phase.action {
            PhaseAction::SetWorkers { workers } => self.set_workers(workers),
            PhaseAction::Pause { duration_ms } => {
                let agents = self.all_agents();
                for id in &agents {
                    self.lifecycle(id, LifecycleKind::Suspended)?;
                }
                let resume = (phase.at_ms + duration_ms).max(self.cursor);
                self.advance(resume)?;
                for id in &agents {
                    self.lifecycle(id, LifecycleKind::Resumed)?;
                }
                Ok(())
            }
            PhaseAction::Stop => {
                self.set_workers(0)?;
                for id in std::mem::take(&mut self.overseers) {
                    self.lifecycle(&id, LifecycleKind::Stopped)?;
                    self.lifecycle(&id, LifecycleKind::Destroyed)?;
                }
                Ok(())
            }
        }
    }

    fn record_message(
        &self,
        p: &Pending,
        receiver: &str,
        received_at: Option<i64>,
    ) -> Result<(), SimError> {
        self.sink.record(TraceEvent::Message(MessageEvent {
            message_id: p.message_id.clone(),
            sender: p.sender.clone(),
            receiver: Endpoint::internal(&self.spec.platform_name, receiver),
            sent_at: Timestamp(p.sent_at),
            received_at: received_at.map(Timestamp),
            headers: p.headers.clone(),
            scope: MessageScope::IntraPlatform,
        }))?;
        Ok(())
    }

    fn draw_task(&mut self) -> Task {
        let i = self.size_index.sample(&mut self.rng);
        let (size, dist) = self.sizes[i];
        Task {
            size,
            planned_ms: sample_ms(&dist, &mut self.rng),
        }
    }

    fn new_message(&mut self, sender: &str, sent_at: i64, task: Task, extra: Vec<(String, String)>) -> Pending {
        self.next_message += 1;
        let n = self.next_message;
        Pending {
            message_id: format!("m{n:06}"),
            sender: Endpoint::internal(&self.spec.platform_name, sender),
            sent_at,
            headers: FipaHeaders {
                performative: "request".into(),
                conversation_id: Some(format!("task-{n}")),
                content: format!("(execute {} {})", task.size, task.planned_ms),
                other: extra,
            },
            task,
        }
    }

    /// Delivers `p` to a worker inbox, or straight to the remote platform.
    fn post(&mut self, p: Pending, to: usize) -> Result<(), SimError> {
        if self.spec.inter_platform_fraction > 0.0
            && self.rng.random::<f64>() < self.spec.inter_platform_fraction
        {
            self.sink.record(TraceEvent::Message(MessageEvent {
                message_id: p.message_id,
                sender: p.sender,
                receiver: Endpoint::external(REMOTE_PLATFORM, "worker"),
                sent_at: Timestamp(p.sent_at),
                received_at: Some(Timestamp(p.sent_at)),
                headers: p.headers,
                scope: MessageScope::InterPlatform,
            }))?;
            return Ok(());
        }
        self.workers[to].inbox.push(p);
        Ok(())
    }

    fn iteration(&mut self, agent_id: &str, start: i64, duration: i64, breakdown: Option<Breakdown>) -> Result<(), SimError> {
        self.ledger.add(start, start + duration);
        self.advance(start + duration)?;
        self.sink.record(TraceEvent::Iteration(IterationEvent {
            agent_id: agent_id.to_owned(),
            start: Timestamp(start),
            duration_ms: duration,
            breakdown,
        }))?;
        Ok(())
    }

    fn overseer_turn(&mut self, index: usize, burst: Option<(usize, Task)>) -> Result<(), SimError> {
        let id = self.overseers[index].clone();
        let start = self.cursor;
        let order = match burst {
            Some(order) => Some(order),
            None if !self.workers.is_empty() && self.rng.random::<f64>() < self.spec.request_prob => {
                let target = self.rng.random_range(0..self.workers.len());
                Some((target, self.draw_task()))
            }
            None => None,
        };
        let Some((target, task)) = order else {
            return self.iteration(&id, start, 0, None);
        };
        let cost = sample_ms(&self.overseer_cost, &mut self.rng);
        let perception = cost / 4;
        let action = cost / 4;
        let breakdown = Breakdown {
            perception_ms: perception,
            reasoning_ms: cost - perception - action,
            action_ms: action,
        };
        self.iteration(&id, start, cost, Some(breakdown))?;
        let msg = self.new_message(&id, start + cost, task, Vec::new());
        self.post(msg, target)
    }

    fn worker_turn(&mut self, index: usize) -> Result<(), SimError> {
        let start = self.cursor;
        let (ready, rest): (Vec<Pending>, Vec<Pending>) =
            std::mem::take(&mut self.workers[index].inbox)
                .into_iter()
                .partition(|p| p.sent_at <= start);
        let id = self.workers[index].agent_id.clone();
        self.workers[index].inbox = rest;
        for p in &ready {
            self.record_message(p, &id, Some(start))?;
        }

        let w = &mut self.workers[index];
        w.iterations += 1;
        let iteration = w.iterations;
        let refusing = iteration < w.recently_overloaded_until;
        w.acting_as_overseer = false;

        if ready.is_empty() {
            return self.iteration(&id, start, 0, None);
        }
        if refusing {
            self.sink.record(TraceEvent::Simple(SimpleEvent {
                agent_id: id.clone(),
                at: Timestamp(start),
                kind: "task-refused".into(),
                payload: Some(format!("{} task(s)", ready.len())),
            }))?;
            return self.iteration(&id, start, 0, None);
        }

        let delegate_to = if self.workers.len() > 1
            && self.rng.random::<f64>() < self.spec.delegation_prob
        {
            let mut other = self.rng.random_range(0..self.workers.len() - 1);
            if other >= index {
                other += 1;
            }
            Some(other)
        } else {
            None
        };

        if let Some(other) = delegate_to {
            self.workers[index].acting_as_overseer = true;
            let costs: Vec<i64> = ready
                .iter()
                .map(|_| sample_ms(&self.overseer_cost, &mut self.rng))
                .collect();
            let total: i64 = costs.iter().sum();
            self.iteration(&id, start, total, None)?;
            let mut sent_at = start;
            for (p, cost) in ready.into_iter().zip(costs) {
                sent_at += cost;
                let extra = vec![("delegated-from".to_owned(), p.message_id.clone())];
                let msg = self.new_message(&id, sent_at, p.task, extra);
                self.post(msg, other)?;
            }
            return Ok(());
        }

        let duration: i64 = ready.iter().map(|p| p.task.planned_ms).sum();
        if duration > self.spec.slice_ms {
            let w = &mut self.workers[index];
            w.recently_overloaded_until =
                iteration + 1 + u64::from(self.spec.refusal_cooldown_iterations);
        }
        self.iteration(&id, start, duration, None)
    }

    /// Applies every phase due at or before `t`. Returns the actions applied.
    fn apply_due(&mut self, phases: &mut std::slice::Iter<'_, Phase>, t: i64) -> Result<Vec<PhaseAction>, SimError> {
        let mut applied = Vec::new();
        while let Some(p) = phases.as_slice().first().filter(|p| p.at_ms <= t) {
            let p = *p;
            phases.next();
            self.advance(p.at_ms.max(self.cursor))?;
            self.apply(p)?;
            applied.push(p.action);
            if p.action == PhaseAction::Stop {
                break;
            }
        }
        Ok(applied)
    }

    fn run(&mut self) -> Result<(), SimError> {
        let spec = self.spec;
        for i in 0..spec.overseers {
            let id = overseer_id(i);
            self.spawn(AgentDescriptor::new(&id, &id, OVERSEER_ROLE, Rationality::Deliberative))?;
            self.overseers.push(id);
        }
        self.set_workers(spec.initial_workers)?;

        let end = spec.end_ms();
        let mut phases = spec.phases.iter();
        let mut next_round = 0;
        'session: loop {
            let round_at = next_round.max(self.cursor);
            let applied = self.apply_due(&mut phases, round_at)?;
            if applied.contains(&PhaseAction::Stop) {
                break;
            }
            if !applied.is_empty() {
                next_round = next_round.max(self.cursor);
                continue;
            }
            if round_at >= end {
                break;
            }
            self.advance(round_at)?;

            let burst = if spec.overseers > 1
                && !self.workers.is_empty()
                && self.rng.random::<f64>() < spec.burst_prob
            {
                let target = self.rng.random_range(0..self.workers.len());
                Some((target, self.draw_task()))
            } else {
                None
            };
            let order: Vec<String> = self.all_agents();
            for id in order {
                let applied = self.apply_due(&mut phases, self.cursor)?;
                if applied.contains(&PhaseAction::Stop) {
                    break 'session;
                }
                if applied.iter().any(|a| matches!(a, PhaseAction::Pause { .. })) {
                    break;
                }
                if let Some(i) = self.overseers.iter().position(|o| *o == id) {
                    let burst = burst.clone().filter(|(t, _)| *t < self.workers.len());
                    self.overseer_turn(i, burst)?;
                } else if let Some(i) = self.workers.iter().position(|w| w.agent_id == id) {
                    self.worker_turn(i)?;
                }
            }
            next_round = round_at + spec.slice_ms;
        }
        self.advance(end.max(self.cursor))?;

        for w in std::mem::take(&mut self.workers) {
            for p in &w.inbox {
                self.record_message(p, &w.agent_id, None)?;
            }
        }
        Ok(())
    }
}

/// Runs `spec` on an open session of `sink` and seals the snapshot.
pub fn run_scenario(spec: &ScenarioSpec, sink: &ProfilerSink) -> Result<SnapshotHandle, SimError> {
    spec.validate()?;
    Platform::new(spec, sink)?.run()?;
    Ok(sink.end_session()?)
}

/// Opens a session on `clock` and runs `spec` to completion.
pub fn record(spec: &ScenarioSpec, clock: Arc<dyn Clock>) -> Result<SnapshotHandle, SimError> {
    spec.validate()?;
    let sink = ProfilerSink::new(clock);
    sink.begin_session_with_id(&spec.session_id(), &spec.platform_name, spec.slice_ms)?;
    run_scenario(spec, &sink)
}

/// Virtual-time run; completes in well under a second of host time.
pub fn record_virtual(spec: &ScenarioSpec) -> Result<SnapshotHandle, SimError> {
    record(spec, Arc::new(VirtualClock::new(virtual_origin())))
}

/// Per-worker-count timeline derived from lifecycle events: `(at, live workers)`.
pub fn worker_population(snapshot: &crate::snapshot::Snapshot) -> Vec<(i64, usize)> {
    let workers: BTreeMap<&str, ()> = snapshot
        .agents
        .iter()
        .filter(|a| a.role == WORKER_ROLE)
        .map(|a| (a.agent_id.as_str(), ()))
        .collect();
    let mut live = 0usize;
    let mut out: Vec<(i64, usize)> = Vec::new();
    for ev in &snapshot.events {
        if let TraceEvent::Lifecycle(l) = &ev.event {
            if !workers.contains_key(l.agent_id.as_str()) {
                continue;
            }
            match l.kind {
                LifecycleKind::Created => live += 1,
                LifecycleKind::Destroyed => live -= 1,
                _ => continue,
            }
            match out.last_mut() {
                Some(last) if last.0 == l.at.0 => last.1 = live,
                _ => out.push((l.at.0, live)),
            }
        }
    }
    out
}
