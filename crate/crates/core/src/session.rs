//! Playback state machine driven by learner commands and caller-supplied ticks.
//!
//! The engine never reads a clock. Given the same starting state and the same
//! command/tick script it produces bit-identical results.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affordance::AffordanceMode;
use crate::audio::AllowedRates;
use crate::bundle::{BundleError, LearningBundle};
use crate::timeline::{
    locate, segment_eight_counts, time_to_frame, BeatGrid, BeatPosition, EightCountSegment,
};

/// Longest `dt` a single tick will consume; larger steps are treated as stalls.
pub const MAX_TICK_S: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("segment {index} out of range (bundle has {count})")]
    SegmentOutOfRange { index: usize, count: usize },
    #[error("rate {rate} not in the allowed set {allowed:?}")]
    RateNotAllowed { rate: f64, allowed: Vec<f64> },
    #[error("seek time {t} outside [0, {duration}]")]
    SeekOutOfRange { t: f64, duration: f64 },
    #[error("session belongs to bundle `{state}`, not `{context}`")]
    BundleMismatch { state: String, context: String },
    #[error("bundle has no beats to navigate")]
    NoSegments,
}

impl SessionError {
    /// Stable machine-readable code for wire protocols.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::SegmentOutOfRange { .. } => "segment-out-of-range",
            SessionError::RateNotAllowed { .. } => "rate-not-allowed",
            SessionError::SeekOutOfRange { .. } => "seek-out-of-range",
            SessionError::BundleMismatch { .. } => "unknown-bundle",
            SessionError::NoSegments => "no-segments",
        }
    }
}

/// Everything about a bundle the state machine needs.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaybackContext {
    pub bundle_id: String,
    pub grid: BeatGrid,
    pub segments: Vec<EightCountSegment>,
    pub fps: f64,
    pub frame_count: usize,
    pub allowed_rates: AllowedRates,
    pub default_mode: AffordanceMode,
}

impl PlaybackContext {
    pub fn from_bundle(
        bundle_id: impl Into<String>,
        bundle: &LearningBundle,
        allowed_rates: AllowedRates,
    ) -> Result<Self, BundleError> {
        let grid = bundle.beat_grid()?;
        let segments = segment_eight_counts(&grid);
        Ok(Self {
            bundle_id: bundle_id.into(),
            grid,
            segments,
            fps: bundle.manifest.fps,
            frame_count: bundle.pose.len(),
            allowed_rates,
            default_mode: bundle.manifest.affordance_mode_default,
        })
    }

    pub fn duration(&self) -> f64 {
        self.grid.duration_s()
    }

    /// Segment that `t` falls in; pre-roll maps to segment 0. `None` only at the very end.
    fn segment_at(&self, t: f64) -> Option<usize> {
        if t >= self.duration() {
            return None;
        }
        locate(&self.grid, &self.segments, t).ok().map(|p| p.segment)
    }

    /// Beat position, treating the end of the track as the last instant of the last beat.
    fn beat_position(&self, t: f64) -> BeatPosition {
        let t = t.clamp(0.0, self.duration());
        match locate(&self.grid, &self.segments, t) {
            Ok(p) => p,
            Err(_) => {
                let beat = self.grid.beat_times().len().saturating_sub(1);
                BeatPosition {
                    segment: self.segments.len().saturating_sub(1),
                    count: (1 + beat % 8) as u8,
                    phase: 1.0 - f64::EPSILON,
                    beat,
                    pre_roll: false,
                }
            }
        }
    }

    fn frame_index(&self, t: f64) -> usize {
        time_to_frame(t.max(0.0), self.fps)
            .unwrap_or(0)
            .min(self.frame_count.saturating_sub(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub bundle_id: String,
    pub position_s: f64,
    pub playing: bool,
    pub rate: f64,
    pub repeat: bool,
    pub music_on: bool,
    pub beat_on: bool,
    pub selected_segment: Option<usize>,
    pub affordance_mode: AffordanceMode,
}

impl SessionState {
    /// Paused at 0, normal speed, music and beat on, nothing selected.
    pub fn new(ctx: &PlaybackContext) -> Self {
        Self {
            bundle_id: ctx.bundle_id.clone(),
            position_s: 0.0,
            playing: false,
            rate: 1.0,
            repeat: false,
            music_on: true,
            beat_on: true,
            selected_segment: None,
            affordance_mode: ctx.default_mode,
        }
    }

    pub fn audio_source(&self) -> AudioSource {
        match (self.music_on, self.beat_on) {
            (true, true) => AudioSource::Mixed,
            (true, false) => AudioSource::Music,
            (false, true) => AudioSource::Beat,
            (false, false) => AudioSource::Silent,
        }
    }
}

/// Audio the client should be playing, derived from the music/beat toggles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AudioSource {
    Mixed,
    Music,
    Beat,
    Silent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "value", rename_all = "snake_case")]
pub enum SessionCommand {
    Play,
    Pause,
    SetRate(f64),
    ToggleRepeat,
    ToggleMusic,
    ToggleBeat,
    SeekSegment(usize),
    NextSegment,
    PrevSegment,
    SeekTime(f64),
    SetAffordanceMode(AffordanceMode),
}

/// Applies one learner command. Only the seek family (`SeekSegment`,
/// `NextSegment`, `PrevSegment`, `SeekTime`) moves the position.
pub fn apply_command(
    state: &SessionState,
    command: &SessionCommand,
    ctx: &PlaybackContext,
) -> Result<SessionState, SessionError> {
    let mut next = state.clone();
    match *command {
        SessionCommand::Play => next.playing = true,
        SessionCommand::Pause => next.playing = false,
        SessionCommand::SetRate(rate) => {
            if !ctx.allowed_rates.contains(rate) {
                return Err(SessionError::RateNotAllowed {
                    rate,
                    allowed: ctx.allowed_rates.as_slice().to_vec(),
                });
            }
            next.rate = rate;
        }
        SessionCommand::ToggleRepeat => next.repeat = !next.repeat,
        SessionCommand::ToggleMusic => next.music_on = !next.music_on,
        SessionCommand::ToggleBeat => next.beat_on = !next.beat_on,
        SessionCommand::SeekSegment(index) => {
            let seg = ctx.segments.get(index).ok_or(SessionError::SegmentOutOfRange {
                index,
                count: ctx.segments.len(),
            })?;
            next.position_s = seg.start_s;
            next.selected_segment = Some(index);
        }
        SessionCommand::NextSegment | SessionCommand::PrevSegment => {
            if ctx.segments.is_empty() {
                return Err(SessionError::NoSegments);
            }
            let last = ctx.segments.len() - 1;
            let current = state
                .selected_segment
                .or_else(|| ctx.segment_at(state.position_s))
                .unwrap_or(last);
            let target = if *command == SessionCommand::NextSegment {
                (current + 1).min(last)
            } else {
                current.saturating_sub(1)
            };
            next.position_s = ctx.segments[target].start_s;
            next.selected_segment = Some(target);
        }
        SessionCommand::SeekTime(t) => {
            if !(t.is_finite() && 0.0 <= t && t <= ctx.duration()) {
                return Err(SessionError::SeekOutOfRange {
                    t,
                    duration: ctx.duration(),
                });
            }
            next.position_s = t;
            if state.selected_segment.is_some() {
                // The selection follows the seek; pre-roll and the end select nothing.
                next.selected_segment = if t < ctx.grid.offset_s() {
                    None
                } else {
                    ctx.segment_at(t)
                };
            }
        }
        SessionCommand::SetAffordanceMode(mode) => next.affordance_mode = mode,
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickOutput {
    pub position_s: f64,
    pub reference_frame: usize,
    pub affordance_frame: usize,
    pub segment: usize,
    /// Count label 1..=8.
    pub count: u8,
    pub phase: f64,
    pub wrapped: bool,
    pub audio_source: AudioSource,
}

/// Advances playback by `dt * rate` seconds.
///
/// `dt` is clamped to `[0, MAX_TICK_S]`. With repeat on, playback loops the
/// selected segment (or the whole bundle when nothing is selected). Without
/// repeat, leaving a selected segment selects the next one, and reaching the
/// end of the bundle pauses and clears the selection.
pub fn tick(state: &SessionState, dt: f64, ctx: &PlaybackContext) -> (SessionState, TickOutput) {
    let dt = if dt.is_nan() {
        0.0
    } else {
        dt.clamp(0.0, MAX_TICK_S)
    };
    let mut next = state.clone();
    let mut wrapped = false;
    let duration = ctx.duration();

    if state.playing {
        let mut pos = state.position_s + dt * state.rate;
        match (
            state.repeat,
            state.selected_segment.and_then(|i| ctx.segments.get(i)),
        ) {
            (true, Some(seg)) => {
                if pos < seg.start_s {
                    pos = seg.start_s;
                } else if pos >= seg.end_s {
                    let span = seg.end_s - seg.start_s;
                    pos = seg.start_s + (pos - seg.start_s).rem_euclid(span);
                    if pos >= seg.end_s {
                        pos = seg.start_s;
                    }
                    wrapped = true;
                }
            }
            (true, None) => {
                if pos >= duration {
                    pos = pos.rem_euclid(duration);
                    if pos >= duration {
                        pos = 0.0;
                    }
                    wrapped = true;
                }
            }
            (false, selected) => {
                if let Some(mut i) = selected.map(|s| s.index) {
                    while i + 1 < ctx.segments.len() && pos >= ctx.segments[i].end_s {
                        i += 1;
                    }
                    next.selected_segment = Some(i);
                }
                if pos >= duration {
                    // The end instant lies outside every segment.
                    pos = duration;
                    next.playing = false;
                    next.selected_segment = None;
                }
            }
        }
        next.position_s = pos;
    }

    let beat = ctx.beat_position(next.position_s);
    let frame = ctx.frame_index(next.position_s);
    let out = TickOutput {
        position_s: next.position_s,
        reference_frame: frame,
        affordance_frame: frame,
        segment: beat.segment,
        count: beat.count,
        phase: beat.phase,
        wrapped,
        audio_source: next.audio_source(),
    };
    (next, out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub index: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub partial: bool,
}

/// Progress-bar data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineSummary {
    pub duration_s: f64,
    pub bpm: f64,
    pub offset_s: f64,
    pub segments: Vec<SegmentSummary>,
}

/// Client-facing view of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub state: SessionState,
    pub current_segment: usize,
    pub count: u8,
    pub phase: f64,
    pub audio_source: AudioSource,
    pub allowed_rates: Vec<f64>,
    pub timeline: TimelineSummary,
}

pub fn snapshot(state: &SessionState, ctx: &PlaybackContext) -> Result<SessionSnapshot, SessionError> {
    if state.bundle_id != ctx.bundle_id {
        return Err(SessionError::BundleMismatch {
            state: state.bundle_id.clone(),
            context: ctx.bundle_id.clone(),
        });
    }
    let beat = ctx.beat_position(state.position_s);
    Ok(SessionSnapshot {
        state: state.clone(),
        current_segment: beat.segment,
        count: beat.count,
        phase: beat.phase,
        audio_source: state.audio_source(),
        allowed_rates: ctx.allowed_rates.as_slice().to_vec(),
        timeline: TimelineSummary {
            duration_s: ctx.duration(),
            bpm: ctx.grid.bpm(),
            offset_s: ctx.grid.offset_s(),
            segments: ctx
                .segments
                .iter()
                .map(|s| SegmentSummary {
                    index: s.index,
                    start_s: s.start_s,
                    end_s: s.end_s,
                    partial: s.partial,
                })
                .collect(),
        },
    })
}
