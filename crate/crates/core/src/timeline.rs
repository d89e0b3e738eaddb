//! Beat grid and 8-count segmentation.
//!
//! Beats sit at `offset + k * 60 / bpm`. They are grouped eight at a time from
//! the first beat; audio before the first beat (pre-roll) belongs to no
//! segment and is reported as the approach to segment 0.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Beats per learning segment.
pub const COUNTS_PER_SEGMENT: usize = 8;

/// Slack used when snapping times onto the beat grid.
const GRID_EPSILON: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimelineError {
    #[error("bpm must be positive and finite, got {0}")]
    InvalidBpm(f64),
    #[error("offset {offset} must satisfy 0 <= offset < duration ({duration})")]
    InvalidOffset { offset: f64, duration: f64 },
    #[error("duration must be positive and finite, got {0}")]
    InvalidDuration(f64),
    #[error("time {t} outside [0, {duration})")]
    OutOfRange { t: f64, duration: f64 },
    #[error("fps must be positive and finite, got {0}")]
    InvalidFps(f64),
    #[error("time must be non-negative and finite, got {0}")]
    NegativeTime(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeatGrid {
    bpm: f64,
    offset_s: f64,
    duration_s: f64,
    beat_times: Vec<f64>,
}

impl BeatGrid {
    pub fn bpm(&self) -> f64 {
        self.bpm
    }

    pub fn offset_s(&self) -> f64 {
        self.offset_s
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }

    pub fn beat_times(&self) -> &[f64] {
        &self.beat_times
    }

    pub fn beat_interval(&self) -> f64 {
        60.0 / self.bpm
    }

    /// Time of beat `k`, computed directly (no accumulated error).
    pub fn beat_time(&self, k: usize) -> f64 {
        self.offset_s + k as f64 * self.beat_interval()
    }
}

/// Builds the beat grid: every `offset + k * 60 / bpm` strictly below the duration.
pub fn build_beat_grid(bpm: f64, offset_s: f64, duration_s: f64) -> Result<BeatGrid, TimelineError> {
    if !(bpm.is_finite() && bpm > 0.0) {
        return Err(TimelineError::InvalidBpm(bpm));
    }
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(TimelineError::InvalidDuration(duration_s));
    }
    if !(offset_s.is_finite() && offset_s >= 0.0 && offset_s < duration_s) {
        return Err(TimelineError::InvalidOffset {
            offset: offset_s,
            duration: duration_s,
        });
    }
    let interval = 60.0 / bpm;
    let beat_times = (0..)
        .map(|k| offset_s + k as f64 * interval)
        .take_while(|&t| t < duration_s)
        .collect();
    Ok(BeatGrid {
        bpm,
        offset_s,
        duration_s,
        beat_times,
    })
}

/// One learning section of (up to) eight beats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EightCountSegment {
    pub index: usize,
    pub start_s: f64,
    pub end_s: f64,
    /// Global indices of the beats in this segment.
    pub beat_indices: Vec<usize>,
    pub partial: bool,
}

impl EightCountSegment {
    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start_s <= t && t < self.end_s
    }
}

/// Groups beats eight at a time.
///
/// A segment ends where the next one starts; the last ends at the grid
/// duration. The last segment is flagged partial when it holds fewer than
/// eight beats, or when the track ends before its eighth beat interval does.
pub fn segment_eight_counts(grid: &BeatGrid) -> Vec<EightCountSegment> {
    let n = grid.beat_times.len();
    let mut segments = Vec::with_capacity(n.div_ceil(COUNTS_PER_SEGMENT));
    for (index, first) in (0..n).step_by(COUNTS_PER_SEGMENT).enumerate() {
        let last = (first + COUNTS_PER_SEGMENT).min(n);
        let start_s = grid.beat_times[first];
        let is_last = last == n;
        let end_s = if is_last {
            grid.duration_s
        } else {
            grid.beat_times[last]
        };
        let full_span = start_s + COUNTS_PER_SEGMENT as f64 * grid.beat_interval();
        let partial =
            last - first < COUNTS_PER_SEGMENT || (is_last && (end_s - full_span).abs() > GRID_EPSILON);
        segments.push(EightCountSegment {
            index,
            start_s,
            end_s,
            beat_indices: (first..last).collect(),
            partial,
        });
    }
    segments
}

/// Where a time falls on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeatPosition {
    pub segment: usize,
    /// Count label within the 8-count, 1..=8.
    pub count: u8,
    /// Fraction of the current beat elapsed, in `[0, 1)`.
    pub phase: f64,
    /// Global beat index (0 during pre-roll).
    pub beat: usize,
    pub pre_roll: bool,
}

/// Locates `t` on the grid. Times before the first beat report segment 0,
/// count 1, phase 0.
pub fn locate(
    grid: &BeatGrid,
    segments: &[EightCountSegment],
    t: f64,
) -> Result<BeatPosition, TimelineError> {
    if !(t.is_finite() && 0.0 <= t && t < grid.duration_s) {
        return Err(TimelineError::OutOfRange {
            t,
            duration: grid.duration_s,
        });
    }
    let n = grid.beat_times.len();
    if t < grid.offset_s || n == 0 {
        return Ok(BeatPosition {
            segment: 0,
            count: 1,
            phase: 0.0,
            beat: 0,
            pre_roll: true,
        });
    }
    let interval = grid.beat_interval();
    let x = (t - grid.offset_s) / interval;
    let nearest = x.round();
    let mut beat = if (x - nearest).abs() < GRID_EPSILON {
        nearest as usize
    } else {
        x.floor() as usize
    };
    beat = beat.min(n - 1);
    let phase = ((t - grid.beat_time(beat)) / interval).clamp(0.0, 1.0 - f64::EPSILON);
    let phase = if phase < GRID_EPSILON { 0.0 } else { phase };
    let segment = (beat / COUNTS_PER_SEGMENT).min(segments.len().saturating_sub(1));
    Ok(BeatPosition {
        segment,
        count: (1 + beat % COUNTS_PER_SEGMENT) as u8,
        phase,
        beat,
        pre_roll: false,
    })
}

/// `floor(t * fps)`, tolerant of `t` landing a hair below a frame boundary.
pub fn time_to_frame(t: f64, fps: f64) -> Result<usize, TimelineError> {
    if !(fps.is_finite() && fps > 0.0) {
        return Err(TimelineError::InvalidFps(fps));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(TimelineError::NegativeTime(t));
    }
    Ok((t * fps + GRID_EPSILON).floor() as usize)
}
