//! Text rendering of the flat profile.

use std::fmt::Write as _;

use crate::query::FlatProfile;

/// `m:ss.mmm` from one minute up, `s.mmm` below.
pub fn format_ms(ms: i64) -> String {
    let sign = if ms < 0 { "-" } else { "" };
    let ms = ms.unsigned_abs();
    let (minutes, rest) = (ms / 60_000, ms % 60_000);
    if minutes > 0 {
        format!("{sign}{minutes}:{:02}.{:03}", rest / 1000, rest % 1000)
    } else {
        format!("{sign}{}.{:03}", rest / 1000, rest % 1000)
    }
}

const HEADER_LABEL_WIDTH: usize = 20;

/// Column layout: (title, unit line, width). The first column is left aligned.
const COLUMNS: [(&str, &str, usize); 9] = [
    ("Agent", "", 10),
    ("T>0", "iterations", 10),
    ("T>100%", "overload", 9),
    ("Activity", "mm:ss.ms", 9),
    ("% Session", "activity", 9),
    ("Max(T)", "ss.ms", 7),
    ("Average(T)", "ss.ms", 10),
    ("Msg.", "sent", 5),
    ("Msg.", "rec.", 5),
];

fn push_row(out: &mut String, cells: &[String]) {
    let mut line = String::new();
    for (i, (cell, (_, _, width))) in cells.iter().zip(COLUMNS.iter()).enumerate() {
        let width = (*width).max(cell.len());
        if i == 0 {
            let _ = write!(line, "{cell:<width$}");
        } else {
            let _ = write!(line, "  {cell:>width$}");
        }
    }
    out.push_str(line.trim_end());
    out.push('\n');
}

/// Session header followed by one aligned row per agent.
pub fn render_flat_profile(profile: &FlatProfile) -> String {
    let h = &profile.header;
    let mut out = String::new();
    let header = [
        ("Total Session Time", format_ms(h.total_session_ms)),
        ("Total Activity", format_ms(h.total_activity_ms)),
        ("Messages Sent", h.messages_sent.to_string()),
        ("Messages Received", h.messages_received.to_string()),
        ("Time Slice Duration", format!("{} ms", h.slice_ms)),
    ];
    for (label, value) in header {
        let _ = writeln!(out, "{label:<HEADER_LABEL_WIDTH$}{value}");
    }
    out.push('\n');
    push_row(
        &mut out,
        &COLUMNS.map(|(title, _, _)| title.to_owned()),
    );
    push_row(&mut out, &COLUMNS.map(|(_, unit, _)| unit.to_owned()));
    for r in &profile.rows {
        push_row(
            &mut out,
            &[
                r.name.clone(),
                r.iterations_nonzero.to_string(),
                r.overload_count.to_string(),
                format_ms(r.activity_ms),
                r.pct_session.to_string(),
                format_ms(r.max_ms),
                format_ms(r.avg_ms),
                r.msgs_sent.to_string(),
                r.msgs_received.to_string(),
            ],
        );
    }
    out
}

/// Parsed cells of a rendered row, split on runs of whitespace.
pub fn split_row(line: &str) -> Vec<&str> {
    line.split_whitespace().collect()
}
