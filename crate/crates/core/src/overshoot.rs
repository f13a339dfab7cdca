//! Time-slice overshoot classes used by the simulator and the scene compiler.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceClass {
    Green,
    Orange,
    Red,
}

impl SliceClass {
    pub fn as_char(self) -> char {
        match self {
            SliceClass::Green => 'g',
            SliceClass::Orange => 'o',
            SliceClass::Red => 'r',
        }
    }
}

/// Class boundaries as percentages of the slice. A duration is green up to
/// and including `green_max_pct`, orange up to and including `orange_max_pct`,
/// red beyond.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    pub green_max_pct: u32,
    pub orange_max_pct: u32,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            green_max_pct: 75,
            orange_max_pct: 100,
        }
    }
}

impl Thresholds {
    pub fn classify(&self, duration_ms: i64, slice_ms: i64) -> SliceClass {
        let scaled = i128::from(duration_ms) * 100;
        let slice = i128::from(slice_ms.max(1));
        if scaled <= i128::from(self.green_max_pct) * slice {
            SliceClass::Green
        } else if scaled <= i128::from(self.orange_max_pct) * slice {
            SliceClass::Orange
        } else {
            SliceClass::Red
        }
    }
}

/// Classification with the default 75% / 100% boundaries.
pub fn classify(duration_ms: i64, slice_ms: i64) -> SliceClass {
    Thresholds::default().classify(duration_ms, slice_ms)
}
