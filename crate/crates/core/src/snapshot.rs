//! Single-file snapshot store.
//!
//! A snapshot is UTF-8 text with one JSON record per line:
//!
//! ```text
//! {"record":"manifest",...}        line 1, session metadata
//! {"record":"agent",...}           zero or more agent descriptors
//! {"record":"iteration","seq":..}  events sorted by (timestamp, seq)
//! {"record":"seal","records":N,"sha256":"..."}
//! ```
//!
//! The seal counts the preceding lines and carries the SHA-256 of their bytes
//! (newlines included). All numbers are decimal integers. Field order is
//! fixed by the type definitions, so equal snapshots encode to equal bytes.
//! `docs/snapshot-format.md` documents every field.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{
    AgentDescriptor, CpuSample, IterationEvent, LifecycleEvent, MessageEvent, SeqEvent,
    SessionInfo, SimpleEvent, Timestamp, TraceEvent, FORMAT_VERSION,
};

/// Conventional file extension for snapshots.
pub const EXTENSION: &str = "aspot";

pub const SUPPORTED_VERSIONS: &[u32] = &[FORMAT_VERSION];

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
    #[error("events out of order at event index {index}")]
    UnorderedEvents { index: usize },
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error("unsupported snapshot format version {0}")]
    UnsupportedVersion(u32),
    #[error("malformed record at line {line}: {message}")]
    MalformedRecord { line: u64, message: String },
    #[error("empty snapshot file")]
    Empty,
}

/// In-memory form of a sealed capture session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub manifest: SessionInfo,
    pub agents: Vec<AgentDescriptor>,
    pub events: Vec<SeqEvent>,
}

impl Snapshot {
    pub fn new(manifest: SessionInfo) -> Self {
        Snapshot {
            manifest,
            agents: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn agent(&self, agent_id: &str) -> Option<&AgentDescriptor> {
        self.agents.iter().find(|a| a.agent_id == agent_id)
    }

    /// Stable sort by `(timestamp, seq)`.
    pub fn sort_events(&mut self) {
        self.events.sort_by_key(SeqEvent::sort_key);
    }

    pub fn is_ordered(&self) -> bool {
        self.events
            .windows(2)
            .all(|w| w[0].sort_key() < w[1].sort_key())
    }
}

#[derive(Serialize, Deserialize)]
struct Sequenced<T> {
    seq: u64,
    #[serde(flatten)]
    event: T,
}

#[derive(Serialize)]
struct SequencedRef<'a, T> {
    seq: u64,
    #[serde(flatten)]
    event: &'a T,
}

#[derive(Serialize, Deserialize)]
struct Seal {
    records: u64,
    sha256: String,
}

#[derive(Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Manifest(SessionInfo),
    Agent(AgentDescriptor),
    Lifecycle(Sequenced<LifecycleEvent>),
    Iteration(Sequenced<IterationEvent>),
    Simple(Sequenced<SimpleEvent>),
    Message(Sequenced<MessageEvent>),
    Cpu(Sequenced<CpuSample>),
    Seal(Seal),
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum RecordRef<'a> {
    Manifest(&'a SessionInfo),
    Agent(&'a AgentDescriptor),
    Lifecycle(SequencedRef<'a, LifecycleEvent>),
    Iteration(SequencedRef<'a, IterationEvent>),
    Simple(SequencedRef<'a, SimpleEvent>),
    Message(SequencedRef<'a, MessageEvent>),
    Cpu(SequencedRef<'a, CpuSample>),
    Seal(&'a Seal),
}

impl<'a> RecordRef<'a> {
    fn event(ev: &'a SeqEvent) -> Self {
        let seq = ev.seq;
        match &ev.event {
            TraceEvent::Lifecycle(event) => RecordRef::Lifecycle(SequencedRef { seq, event }),
            TraceEvent::Iteration(event) => RecordRef::Iteration(SequencedRef { seq, event }),
            TraceEvent::Simple(event) => RecordRef::Simple(SequencedRef { seq, event }),
            TraceEvent::Message(event) => RecordRef::Message(SequencedRef { seq, event }),
            TraceEvent::Cpu(event) => RecordRef::Cpu(SequencedRef { seq, event }),
        }
    }
}

/// Streaming writer. Events must arrive in strictly increasing `(timestamp, seq)` order.
pub struct SnapshotWriter<W: Write> {
    out: W,
    hasher: Sha256,
    records: u64,
    events: usize,
    last_key: Option<(Timestamp, u64)>,
    line: Vec<u8>,
}

impl<W: Write> SnapshotWriter<W> {
    pub fn new(
        out: W,
        manifest: &SessionInfo,
        agents: &[AgentDescriptor],
    ) -> Result<Self, SnapshotError> {
        let mut w = SnapshotWriter {
            out,
            hasher: Sha256::new(),
            records: 0,
            events: 0,
            last_key: None,
            line: Vec::with_capacity(256),
        };
        w.put(&RecordRef::Manifest(manifest))?;
        for a in agents {
            w.put(&RecordRef::Agent(a))?;
        }
        Ok(w)
    }

    fn put(&mut self, record: &RecordRef<'_>) -> Result<(), SnapshotError> {
        self.line.clear();
        serde_json::to_writer(&mut self.line, record).map_err(io::Error::from)?;
        self.line.push(b'\n');
        self.hasher.update(&self.line);
        self.out.write_all(&self.line)?;
        self.records += 1;
        Ok(())
    }

    pub fn push(&mut self, event: &SeqEvent) -> Result<(), SnapshotError> {
        let key = event.sort_key();
        if self.last_key.is_some_and(|last| key <= last) {
            return Err(SnapshotError::UnorderedEvents { index: self.events });
        }
        self.last_key = Some(key);
        self.put(&RecordRef::event(event))?;
        self.events += 1;
        Ok(())
    }

    /// Writes the integrity record and returns the sink plus the hex digest.
    pub fn finish(mut self) -> Result<(W, String), SnapshotError> {
        let digest = hex::encode(self.hasher.clone().finalize());
        let seal = Seal {
            records: self.records,
            sha256: digest.clone(),
        };
        self.line.clear();
        serde_json::to_writer(&mut self.line, &RecordRef::Seal(&seal)).map_err(io::Error::from)?;
        self.line.push(b'\n');
        self.out.write_all(&self.line)?;
        self.out.flush()?;
        Ok((self.out, digest))
    }
}

/// Canonical bytes of a snapshot.
pub fn encode(snapshot: &Snapshot) -> Result<Vec<u8>, SnapshotError> {
    let mut w = SnapshotWriter::new(Vec::new(), &snapshot.manifest, &snapshot.agents)?;
    for ev in &snapshot.events {
        w.push(ev)?;
    }
    Ok(w.finish()?.0)
}

pub fn write_snapshot(path: &Path, snapshot: &Snapshot) -> Result<(), SnapshotError> {
    // Encode first so an ordering error never leaves a partial file behind.
    let bytes = encode(snapshot)?;
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, SnapshotError> {
    let file = File::open(path)?;
    SnapshotReader::new(BufReader::new(file))?.into_snapshot()
}

pub fn decode(bytes: &[u8]) -> Result<Snapshot, SnapshotError> {
    SnapshotReader::new(bytes)?.into_snapshot()
}

/// Streaming reader: holds the manifest and agent list, yields events one at a time.
///
/// The checksum is verified when the seal record is reached, so a consumer
/// must drain the iterator before trusting aggregate results.
pub struct SnapshotReader<R: BufRead> {
    input: R,
    hasher: Sha256,
    line_no: u64,
    records: u64,
    manifest: SessionInfo,
    agents: Vec<AgentDescriptor>,
    pending: Option<SeqEvent>,
    last_key: Option<(Timestamp, u64)>,
    events: usize,
    done: bool,
    buf: String,
}

enum Line {
    Record(Record),
    Eof,
}

impl<R: BufRead> SnapshotReader<R> {
    pub fn new(input: R) -> Result<Self, SnapshotError> {
        let mut r = SnapshotReader {
            input,
            hasher: Sha256::new(),
            line_no: 0,
            records: 0,
            manifest: SessionInfo::new("", "", chrono::DateTime::UNIX_EPOCH, 1),
            agents: Vec::new(),
            pending: None,
            last_key: None,
            events: 0,
            done: false,
            buf: String::new(),
        };
        match r.next_line()? {
            Line::Eof => return Err(SnapshotError::Empty),
            Line::Record(Record::Manifest(m)) => {
                if !SUPPORTED_VERSIONS.contains(&m.format_version) {
                    return Err(SnapshotError::UnsupportedVersion(m.format_version));
                }
                r.manifest = m;
            }
            Line::Record(_) => {
                return Err(SnapshotError::MalformedRecord {
                    line: 1,
                    message: "first record must be the manifest".into(),
                })
            }
        }
        loop {
            match r.next_line()? {
                Line::Eof => {
                    return Err(SnapshotError::CorruptSnapshot(
                        "missing integrity record (truncated?)".into(),
                    ))
                }
                Line::Record(Record::Agent(a)) => r.agents.push(a),
                Line::Record(Record::Seal(seal)) => {
                    r.check_seal(&seal)?;
                    break;
                }
                Line::Record(other) => {
                    r.pending = Some(r.to_event(other)?);
                    break;
                }
            }
        }
        Ok(r)
    }

    pub fn manifest(&self) -> &SessionInfo {
        &self.manifest
    }

    pub fn agents(&self) -> &[AgentDescriptor] {
        &self.agents
    }

    pub fn into_snapshot(mut self) -> Result<Snapshot, SnapshotError> {
        let mut events = Vec::new();
        for ev in self.by_ref() {
            events.push(ev?);
        }
        Ok(Snapshot {
            manifest: self.manifest,
            agents: self.agents,
            events,
        })
    }

    fn next_line(&mut self) -> Result<Line, SnapshotError> {
        self.buf.clear();
        let n = self.input.read_line(&mut self.buf)?;
        if n == 0 {
            return Ok(Line::Eof);
        }
        self.line_no += 1;
        if !self.buf.ends_with('\n') {
            return Err(SnapshotError::CorruptSnapshot(format!(
                "line {} is incomplete (truncated file)",
                self.line_no
            )));
        }
        let record: Record =
            serde_json::from_str(&self.buf).map_err(|e| SnapshotError::MalformedRecord {
                line: self.line_no,
                message: e.to_string(),
            })?;
        if !matches!(record, Record::Seal(_)) {
            self.hasher.update(self.buf.as_bytes());
            self.records += 1;
        }
        Ok(Line::Record(record))
    }

    fn check_seal(&mut self, seal: &Seal) -> Result<(), SnapshotError> {
        self.done = true;
        if seal.records != self.records {
            return Err(SnapshotError::CorruptSnapshot(format!(
                "seal counts {} records, found {}",
                seal.records, self.records
            )));
        }
        let digest = hex::encode(self.hasher.clone().finalize());
        if digest != seal.sha256 {
            return Err(SnapshotError::CorruptSnapshot("checksum mismatch".into()));
        }
        self.buf.clear();
        if self.input.read_line(&mut self.buf)? != 0 {
            return Err(SnapshotError::CorruptSnapshot(
                "data after integrity record".into(),
            ));
        }
        Ok(())
    }

    fn to_event(&mut self, record: Record) -> Result<SeqEvent, SnapshotError> {
        let ev = match record {
            Record::Lifecycle(s) => SeqEvent {
                seq: s.seq,
                event: TraceEvent::Lifecycle(s.event),
            },
            Record::Iteration(s) => SeqEvent {
                seq: s.seq,
                event: TraceEvent::Iteration(s.event),
            },
            Record::Simple(s) => SeqEvent {
                seq: s.seq,
                event: TraceEvent::Simple(s.event),
            },
            Record::Message(s) => SeqEvent {
                seq: s.seq,
                event: TraceEvent::Message(s.event),
            },
            Record::Cpu(s) => SeqEvent {
                seq: s.seq,
                event: TraceEvent::Cpu(s.event),
            },
            Record::Manifest(_) | Record::Agent(_) | Record::Seal(_) => {
                return Err(SnapshotError::MalformedRecord {
                    line: self.line_no,
                    message: "unexpected record kind in event section".into(),
                })
            }
        };
        let key = ev.sort_key();
        if self.last_key.is_some_and(|last| key <= last) {
            return Err(SnapshotError::UnorderedEvents { index: self.events });
        }
        self.last_key = Some(key);
        self.events += 1;
        Ok(ev)
    }

    fn read_event(&mut self) -> Result<Option<SeqEvent>, SnapshotError> {
        if let Some(ev) = self.pending.take() {
            return Ok(Some(ev));
        }
        if self.done {
            return Ok(None);
        }
        match self.next_line()? {
            Line::Eof => Err(SnapshotError::CorruptSnapshot(
                "missing integrity record (truncated?)".into(),
            )),
            Line::Record(Record::Seal(seal)) => {
                self.check_seal(&seal)?;
                Ok(None)
            }
            Line::Record(other) => self.to_event(other).map(Some),
        }
    }
}

impl<R: BufRead> Iterator for SnapshotReader<R> {
    type Item = Result<SeqEvent, SnapshotError>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.read_event() {
            Ok(Some(ev)) => Some(Ok(ev)),
            Ok(None) => None,
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}
