//! Response bodies shared by the command line and the HTTP service.
//!
//! Every body is produced here and nowhere else, so an export written by the
//! CLI and the matching HTTP response are the same bytes.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::query::{self, QueryError};
use crate::report;
use crate::scene::{self, LaneOrder, SceneError, Viewport};
use crate::snapshot::Snapshot;

/// Width used when no `px_per_ms` is given: the viewport is fitted to this many pixels.
pub const DEFAULT_WIDTH_PX: f64 = 1600.0;

fn json_line<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("bodies serialize");
    s.push('\n');
    s
}

pub fn session_body(snapshot: &Snapshot) -> String {
    json_line(&snapshot.manifest)
}

pub fn flat_profile_body(snapshot: &Snapshot) -> String {
    json_line(&query::flat_profile(snapshot))
}

pub fn flat_profile_text(snapshot: &Snapshot) -> String {
    report::render_flat_profile(&query::flat_profile(snapshot))
}

pub fn global_stats_body(snapshot: &Snapshot) -> String {
    json_line(&query::global_stats(snapshot))
}

pub fn cpu_body(snapshot: &Snapshot, bucket_ms: i64) -> Result<String, QueryError> {
    Ok(json_line(&query::cpu_series(snapshot, bucket_ms)?))
}

pub fn message_body(snapshot: &Snapshot, message_id: &str) -> Result<String, QueryError> {
    Ok(json_line(query::message_detail(snapshot, message_id)?))
}

pub fn birds_eye_body(snapshot: &Snapshot, buckets: u32) -> Result<String, SceneError> {
    if buckets == 0 {
        return Err(SceneError::InvalidViewport("buckets must be positive".into()));
    }
    Ok(scene::birds_eye_canonical(&scene::birds_eye(snapshot, buckets), None))
}

/// Scene request as it arrives on the command line or in a query string.
/// Missing bounds default to the whole session; `hidden` and `order` are
/// comma-separated agent ids.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
pub struct SceneParams {
    pub t0: Option<i64>,
    pub t1: Option<i64>,
    pub px_per_ms: Option<f64>,
    pub hidden: Option<String>,
    pub order: Option<String>,
}

fn id_list(s: &Option<String>) -> Vec<String> {
    s.as_deref()
        .unwrap_or("")
        .split(',')
        .map(str::trim)
        .filter(|id| !id.is_empty())
        .map(str::to_owned)
        .collect()
}

impl SceneParams {
    pub fn viewport(&self, snapshot: &Snapshot) -> Viewport {
        let t0 = self.t0.unwrap_or(0);
        let t1 = self.t1.unwrap_or(snapshot.manifest.duration_ms);
        let px_per_ms = self
            .px_per_ms
            .unwrap_or_else(|| DEFAULT_WIDTH_PX / (t1 - t0).max(1) as f64);
        let order = id_list(&self.order);
        Viewport {
            t0,
            t1,
            px_per_ms,
            lane_order: if order.is_empty() {
                LaneOrder::Auto
            } else {
                LaneOrder::Explicit(order)
            },
            hidden: id_list(&self.hidden).into_iter().collect::<BTreeSet<_>>(),
        }
    }
}

pub fn scene_body(snapshot: &Snapshot, params: &SceneParams) -> Result<String, SceneError> {
    let vp = params.viewport(snapshot);
    Ok(scene::compile_scene(snapshot, &vp)?.to_canonical())
}
