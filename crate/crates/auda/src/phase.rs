//! Smile phase segmentation: onset, apex, offset, and the global phase.
//!
//! Detection is threshold-and-longest-run on the r-adjusted dynamics of the
//! smile-intensity signal: the onset is the longest run of frames whose δ̂
//! exceeds +τ, the offset the longest run below -τ starting no earlier than
//! the onset's end, and the apex the longest run of high-intensity frames in
//! between. τ is relative to the δ̂ range so the rule is amplitude-invariant.

use serde::{Deserialize, Serialize};

use crate::dynamics::DynamicsBundle;
use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Half-open frame interval [start, end).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameInterval {
    pub start: usize,
    pub end: usize,
}

impl FrameInterval {
    pub const EMPTY: FrameInterval = FrameInterval { start: 0, end: 0 };

    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        FrameInterval { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind {
    Onset,
    Apex,
    Offset,
    Global,
}

impl PhaseKind {
    pub const ALL: [PhaseKind; 4] = [
        PhaseKind::Onset,
        PhaseKind::Apex,
        PhaseKind::Offset,
        PhaseKind::Global,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PhaseKind::Onset => "onset",
            PhaseKind::Apex => "apex",
            PhaseKind::Offset => "offset",
            PhaseKind::Global => "global",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseConfig {
    /// Threshold as a fraction of the δ̂ range (max - min).
    pub tau_rel: f64,
    /// Apex frames must reach this fraction of the peak intensity.
    pub apex_ratio: f64,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        PhaseConfig {
            tau_rel: 0.1,
            apex_ratio: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSegmentation {
    pub onset: FrameInterval,
    pub apex: FrameInterval,
    pub offset: FrameInterval,
    pub global_phase: FrameInterval,
}

impl PhaseSegmentation {
    pub fn phase(&self, kind: PhaseKind) -> FrameInterval {
        match kind {
            PhaseKind::Onset => self.onset,
            PhaseKind::Apex => self.apex,
            PhaseKind::Offset => self.offset,
            PhaseKind::Global => self.global_phase,
        }
    }
}

/// Longest maximal run of frames satisfying `pred`, restricted to frames at
/// or after `from`. Ties go to the earliest run.
fn longest_run(track: &[f64], from: usize, pred: impl Fn(f64) -> bool) -> FrameInterval {
    let mut best = FrameInterval::EMPTY;
    let mut start = None;
    for i in from..=track.len() {
        let hit = i < track.len() && pred(track[i]);
        match (start, hit) {
            (None, true) => start = Some(i),
            (Some(s), false) => {
                if i - s > best.len() {
                    best = FrameInterval::new(s, i);
                }
                start = None;
            }
            _ => {}
        }
    }
    best
}

/// Split a smile sequence into onset, apex, offset, and global phases.
///
/// A flat intensity signal (no dynamics at all) yields empty named phases
/// and only the global phase; that is a valid outcome, not an error.
pub fn segment_phases(
    smile_dynamics: &DynamicsBundle,
    smile_intensity: &TimeSeries,
    config: &PhaseConfig,
) -> Result<PhaseSegmentation> {
    if !(config.tau_rel > 0.0 && config.tau_rel.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "tau_rel must be positive, got {}",
            config.tau_rel
        )));
    }
    if !(config.apex_ratio > 0.0 && config.apex_ratio.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "apex_ratio must be positive, got {}",
            config.apex_ratio
        )));
    }
    let n = smile_intensity.len();
    let track = smile_dynamics.smallest();
    if track.len() != n {
        return Err(Error::InvalidArgument(format!(
            "dynamics bundle length {} does not match intensity length {n}",
            track.len()
        )));
    }
    if n < track.window {
        return Err(Error::InsufficientData(format!(
            "sequence of {n} frames is shorter than the smallest window {}",
            track.window
        )));
    }
    let global_phase = FrameInterval::new(0, n);

    let adj = &track.adjusted;
    let lo = adj.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = adj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // a flat signal has δ̂ = 0 everywhere, so τ = 0 and the strict
    // comparisons below leave every named phase empty
    let tau = config.tau_rel * (hi - lo);

    let onset = longest_run(adj, 0, |x| x > tau);
    let offset_from = if onset.is_empty() { 0 } else { onset.end };
    let offset = longest_run(adj, offset_from, |x| x < -tau);

    // the apex only exists relative to detected smile movement
    let region_start = if onset.is_empty() { 0 } else { onset.end };
    let region_end = if offset.is_empty() { n } else { offset.start };
    let apex = if (!onset.is_empty() || !offset.is_empty()) && region_start < region_end {
        let values = smile_intensity.values();
        let vmax = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let thr = config.apex_ratio * vmax;
        longest_run(&values[..region_end], region_start, |v| v >= thr)
    } else {
        FrameInterval::EMPTY
    };

    Ok(PhaseSegmentation {
        onset,
        apex,
        offset,
        global_phase,
    })
}

/// Contiguous sub-track for a phase; empty intervals yield an empty slice.
pub fn phase_slice(track: &[f64], phase: FrameInterval) -> Result<&[f64]> {
    if phase.start > phase.end || phase.end > track.len() {
        return Err(Error::InvalidArgument(format!(
            "interval [{}, {}) out of bounds for track of length {}",
            phase.start,
            phase.end,
            track.len()
        )));
    }
    Ok(&track[phase.start..phase.end])
}
