//! Command-line front end. Each command returns its process exit code.

use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use crate::api::{self, SceneParams};
use crate::instrument::WallClock;
use crate::server::{self, AppState};
use crate::sim::{self, ScenarioSpec, SimError};
use crate::snapshot::{self, Snapshot};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID_SCENARIO: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_CORRUPT_SNAPSHOT: i32 = 4;
pub const EXIT_INVALID_VIEWPORT: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "masprof", version, about = "Profiler for message-passing multi-agent systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Canonical,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a benchmark scenario and write its snapshot.
    Record {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run against the wall clock instead of virtual time.
        #[arg(long)]
        realtime: bool,
    },
    /// Print the flat profile of a snapshot.
    Profile {
        snapshot: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Compile a space-time scene and write its canonical serialization.
    ExportScene {
        snapshot: PathBuf,
        #[arg(long)]
        t0: Option<i64>,
        #[arg(long)]
        t1: Option<i64>,
        #[arg(long)]
        px_per_ms: Option<f64>,
        /// Comma-separated agent ids to leave out.
        #[arg(long)]
        hidden: Option<String>,
        /// Comma-separated agent ids to put on top.
        #[arg(long)]
        order: Option<String>,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the snapshot over HTTP.
    Serve {
        snapshot: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
    },
}

fn load(path: &Path, err: &mut dyn Write) -> Result<Snapshot, i32> {
    snapshot::read_snapshot(path).map_err(|e| {
        let _ = writeln!(err, "error: {}: {e}", path.display());
        match e {
            snapshot::SnapshotError::Io(_) => EXIT_IO,
            _ => EXIT_CORRUPT_SNAPSHOT,
        }
    })
}

fn write_out(path: Option<&Path>, text: &str, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match path {
        Some(p) => std::fs::write(p, text).map_err(|e| (p.display().to_string(), e)),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| ("standard output".to_owned(), e)),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err((what, e)) => {
            let _ = writeln!(err, "error: cannot write {what}: {e}");
            EXIT_IO
        }
    }
}

pub fn cmd_record(
    scenario: &Path,
    out_path: &Path,
    realtime: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let spec = match ScenarioSpec::load(scenario) {
        Ok(s) => s,
        Err(e) => {
            let _ = match &e {
                SimError::Io { .. } => writeln!(err, "error: {e}"),
                _ => writeln!(err, "error: {}: {e}", scenario.display()),
            };
            return EXIT_INVALID_SCENARIO;
        }
    };
    let handle = if realtime {
        sim::record(&spec, Arc::new(WallClock::new()))
    } else {
        sim::record_virtual(&spec)
    };
    let handle = match handle {
        Ok(h) => h,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", scenario.display());
            return EXIT_INVALID_SCENARIO;
        }
    };
    for w in &handle.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    if let Err(e) = handle.persist(out_path) {
        let _ = writeln!(err, "error: cannot write {}: {e}", out_path.display());
        return EXIT_IO;
    }
    let s = &handle.snapshot;
    let _ = writeln!(
        out,
        "session {}: duration {} ms, {} events, {} agents -> {}",
        s.manifest.session_id,
        s.manifest.duration_ms,
        s.events.len(),
        s.agents.len(),
        out_path.display()
    );
    EXIT_OK
}

pub fn cmd_profile(path: &Path, format: Format, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let snap = match load(path, err) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let text = match format {
        Format::Text => api::flat_profile_text(&snap),
        Format::Canonical => api::flat_profile_body(&snap),
    };
    write_out(None, &text, out, err)
}

pub fn cmd_export_scene(
    path: &Path,
    params: &SceneParams,
    out_path: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let snap = match load(path, err) {
        Ok(s) => s,
        Err(code) => return code,
    };
    match api::scene_body(&snap, params) {
        Ok(text) => write_out(out_path, &text, out, err),
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INVALID_VIEWPORT
        }
    }
}

pub fn cmd_serve(path: &Path, bind: IpAddr, port: u16, err: &mut dyn Write) -> i32 {
    let state = match AppState::load(path) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", path.display());
            return match e {
                snapshot::SnapshotError::Io(_) => EXIT_IO,
                _ => EXIT_CORRUPT_SNAPSHOT,
            };
        }
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start runtime: {e}");
            return EXIT_IO;
        }
    };
    match runtime.block_on(server::serve(state, SocketAddr::new(bind, port))) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {bind}:{port}: {e}");
            EXIT_IO
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match cli.command {
        Command::Record {
            scenario,
            out: out_path,
            realtime,
        } => cmd_record(&scenario, &out_path, realtime, out, err),
        Command::Profile { snapshot, format } => cmd_profile(&snapshot, format, out, err),
        Command::ExportScene {
            snapshot,
            t0,
            t1,
            px_per_ms,
            hidden,
            order,
            out: out_path,
        } => {
            let params = SceneParams {
                t0,
                t1,
                px_per_ms,
                hidden,
                order,
            };
            cmd_export_scene(&snapshot, &params, out_path.as_deref(), out, err)
        }
        Command::Serve {
            snapshot,
            port,
            bind,
        } => cmd_serve(&snapshot, bind, port, err),
    }
}
