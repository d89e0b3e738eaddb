//! Dance-practice engine built around the 8-count.
//!
//! A song clip plus a reference pose sequence becomes a [`bundle::LearningBundle`]:
//! three pre-rendered audio variants (music + counts, music, counts), the
//! reference animation, an affordance track retargeted to the learner's body,
//! and an 8-count timeline. [`session`] plays a bundle back under learner
//! control (rate, repeat, music/beat toggles, section navigation).
//!
//! Modules, bottom-up:
//!
//! - [`motion`]: canonical 24-joint skeleton, pose-JSON, resampling, smoothing, limb lengths
//! - [`audio`]: count-track synthesis, RMS normalization, mixing, trimming, rate rendering, WAV
//! - [`timeline`]: beat grid, 8-count segments, time/beat/frame conversions
//! - [`affordance`]: learner calibration, retargeting, affordance tracks and display modes
//! - [`bundle`]: bundle assembly and the on-disk format
//! - [`session`]: the playback state machine
//! - [`synth`]: synthetic song and dancer for fixtures

pub mod affordance;
pub mod audio;
pub mod bundle;
pub mod motion;
pub mod session;
pub mod synth;
pub mod timeline;
mod vec3;

pub use affordance::{AffordanceMode, AffordanceTrack, RetargetTransform, UserCalibration};
pub use audio::{AllowedRates, AudioTrack, CountTrackSpec};
pub use bundle::{BundleManifest, LearningBundle};
pub use motion::{PoseFrame, PoseSequence, Skeleton};
pub use session::{SessionCommand, SessionState, TickOutput};
pub use timeline::{BeatGrid, EightCountSegment};
pub use vec3::Vec3;
