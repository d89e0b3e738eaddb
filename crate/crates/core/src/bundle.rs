//! On-disk learning bundles.
//!
//! A bundle is a directory:
//!
//! ```text
//! manifest.json
//! audio/mixed.wav        music + count track
//! audio/music.wav        music only
//! audio/beat.wav         count track only
//! motion/reference.pose.json
//! motion/affordance.json
//! ```
//!
//! The manifest is written canonically (sorted keys, shortest round-trip
//! floats) so repeated writes are byte-identical.

use std::fs;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affordance::{
    compute_retarget, default_emphasized_joints, generate_affordance_track, parse_affordance_track,
    serialize_affordance_track, AffordanceError, AffordanceMode, AffordanceTrack, RetargetTransform,
    UserCalibration,
};
use crate::audio::{
    mix, normalize_rms, read_wav_file, synthesize_count_track, trim, write_wav_file, AudioError, AudioTrack,
    CountTrackSpec, WavEncoding,
};
use crate::motion::{parse_pose_sequence, serialize_pose_sequence, MotionError, PoseSequence, Skeleton};
use crate::timeline::{build_beat_grid, segment_eight_counts, BeatGrid, EightCountSegment, TimelineError};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Default session frame rate.
pub const DEFAULT_FPS: f64 = 30.0;
/// Default common RMS target for music and count track.
pub const DEFAULT_TARGET_RMS: f64 = 0.2;
/// Largest tolerated gap between pose and audio durations, in seconds.
pub const MAX_DURATION_MISMATCH_S: f64 = 0.5;

const SEGMENT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("pose covers {pose_s:.3} s but audio covers {audio_s:.3} s")]
    DurationMismatch { pose_s: f64, audio_s: f64 },
    #[error("destination {0} exists and is not empty")]
    DestinationNotEmpty(PathBuf),
    #[error("missing asset `{asset}` at {path}")]
    MissingAsset { asset: String, path: PathBuf },
    #[error("asset path `{0}` escapes the bundle root")]
    UnsafeAssetPath(String),
    #[error("unsupported bundle format version {found} (reader supports {FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("malformed manifest: {0}")]
    Manifest(String),
    #[error("bundle failed validation: {}", summarize(.0))]
    Invalid(Vec<Violation>),
    #[error("{asset}: {source}")]
    Asset {
        asset: String,
        #[source]
        source: Box<BundleError>,
    },
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error(transparent)]
    Affordance(#[from] AffordanceError),
    #[error(transparent)]
    Timeline(#[from] TimelineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn summarize(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

/// One failed bundle invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: String,
    pub detail: String,
}

impl Violation {
    fn new(code: &str, detail: impl Into<String>) -> Self {
        Self {
            code: code.to_string(),
            detail: detail.into(),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}", self.code, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetPaths {
    pub mixed: String,
    pub music: String,
    pub beat: String,
    pub pose: String,
    pub affordance: String,
}

impl Default for AssetPaths {
    fn default() -> Self {
        Self {
            mixed: "audio/mixed.wav".into(),
            music: "audio/music.wav".into(),
            beat: "audio/beat.wav".into(),
            pose: "motion/reference.pose.json".into(),
            affordance: "motion/affordance.json".into(),
        }
    }
}

impl AssetPaths {
    /// `(asset name, relative path)` for every asset.
    pub fn entries(&self) -> [(&'static str, &str); 5] {
        [
            ("mixed", &self.mixed),
            ("music", &self.music),
            ("beat", &self.beat),
            ("pose", &self.pose),
            ("affordance", &self.affordance),
        ]
    }
}

/// Samples hard-clipped while rendering each audio variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClipCounts {
    pub music: usize,
    pub beat: usize,
    pub mixed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format_version: u32,
    pub title: String,
    pub bpm: f64,
    pub offset_s: f64,
    pub duration_s: f64,
    pub fps: f64,
    pub sample_rate: u32,
    pub target_rms: f64,
    pub segments: Vec<EightCountSegment>,
    pub affordance_mode_default: AffordanceMode,
    pub emphasized_joints: Vec<String>,
    pub assets: AssetPaths,
    pub clipping: ClipCounts,
}

impl BundleManifest {
    /// Expected pose/affordance frame count, `round(duration * fps)`.
    pub fn expected_frames(&self) -> usize {
        (self.duration_s * self.fps).round() as usize
    }

    pub fn beat_grid(&self) -> Result<BeatGrid, TimelineError> {
        build_beat_grid(self.bpm, self.offset_s, self.duration_s)
    }

    /// Canonical JSON: sorted keys, two-space indent, trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("manifest serializes");
        let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
        s.push('\n');
        s
    }
}

/// Which pre-rendered audio variant to play.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AudioVariant {
    Mixed,
    Music,
    Beat,
}

impl std::str::FromStr for AudioVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mixed" => Ok(Self::Mixed),
            "music" => Ok(Self::Music),
            "beat" => Ok(Self::Beat),
            other => Err(format!("unknown audio variant `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningBundle {
    pub manifest: BundleManifest,
    pub mixed: AudioTrack,
    pub music: AudioTrack,
    pub beat: AudioTrack,
    pub pose: PoseSequence,
    pub affordance: AffordanceTrack,
}

impl LearningBundle {
    pub fn audio(&self, variant: AudioVariant) -> &AudioTrack {
        match variant {
            AudioVariant::Mixed => &self.mixed,
            AudioVariant::Music => &self.music,
            AudioVariant::Beat => &self.beat,
        }
    }

    pub fn beat_grid(&self) -> Result<BeatGrid, TimelineError> {
        self.manifest.beat_grid()
    }

    /// Reference measurements taken from the first pose frame.
    pub fn reference_calibration(&self) -> UserCalibration {
        UserCalibration::from_frame(&self.pose.frames()[0], self.pose.skeleton())
    }
}

/// What to cut from the song and how its beat is laid out.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleRequest {
    pub title: String,
    pub bpm: f64,
    /// First beat, in seconds from `start_s`.
    pub offset_s: f64,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembleOptions {
    pub fps: f64,
    pub target_rms: f64,
    pub affordance_mode: AffordanceMode,
    pub emphasized_joints: Vec<String>,
    /// Click voice; `bpm`, `duration_s` and `offset_s` are overwritten.
    pub count_voice: CountTrackSpec,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        Self {
            fps: DEFAULT_FPS,
            target_rms: DEFAULT_TARGET_RMS,
            affordance_mode: AffordanceMode::default(),
            emphasized_joints: default_emphasized_joints(),
            count_voice: CountTrackSpec::new(120.0, 0.0),
        }
    }
}

/// Builds a bundle from a song, its reference pose and the beat layout.
///
/// The pose shares the song's clock (frame 0 at song time 0). Without a
/// calibration the affordance track uses the identity transform.
pub fn assemble_bundle(
    song: &AudioTrack,
    pose: &PoseSequence,
    request: &BundleRequest,
    calibration: Option<&UserCalibration>,
    options: &AssembleOptions,
) -> Result<LearningBundle, BundleError> {
    if request.end_s.is_nan() || request.start_s.is_nan() || request.end_s <= request.start_s {
        return Err(BundleError::InvalidRequest("end before start".into()));
    }
    if !(options.fps.is_finite() && options.fps > 0.0) {
        return Err(BundleError::InvalidRequest(format!(
            "fps {} must be positive",
            options.fps
        )));
    }
    let pose_s = pose.len() as f64 / pose.fps();
    let audio_s = song.duration();
    if (pose_s - audio_s).abs() > MAX_DURATION_MISMATCH_S {
        return Err(BundleError::DurationMismatch { pose_s, audio_s });
    }

    let clip = trim(song, request.start_s, request.end_s)?;
    let duration_s = request.end_s - request.start_s;
    let grid = build_beat_grid(request.bpm, request.offset_s, duration_s)?;
    let segments = segment_eight_counts(&grid);

    let music = normalize_rms(&clip, options.target_rms)?;
    let mut voice = options.count_voice.clone();
    voice.bpm = request.bpm;
    voice.offset_s = request.offset_s;
    voice.duration_s = clip.len() as f64 / clip.sample_rate() as f64;
    let clicks = synthesize_count_track(&voice, clip.sample_rate())?;
    // Equal lengths keep the three variants interchangeable mid-playback.
    let clicks_track = clicks.track.resized(clip.len());
    let beat = normalize_rms(&clicks_track, options.target_rms)?;
    let mixed = mix(&music.track, &beat.track, 0.0, 1.0, 1.0)?;

    let frames = (duration_s * options.fps).round() as usize;
    let reference = pose.window(request.start_s, frames.max(1), options.fps)?;
    let transform = match calibration {
        Some(user) => compute_retarget(
            &UserCalibration::from_frame(&reference.frames()[0], reference.skeleton()),
            user,
            reference.skeleton(),
        )?,
        None => RetargetTransform::identity(reference.skeleton()),
    };
    let affordance = generate_affordance_track(
        &reference,
        &transform,
        options.affordance_mode,
        &options.emphasized_joints,
    )?;

    let manifest = BundleManifest {
        format_version: FORMAT_VERSION,
        title: request.title.clone(),
        bpm: request.bpm,
        offset_s: request.offset_s,
        duration_s,
        fps: options.fps,
        sample_rate: clip.sample_rate(),
        target_rms: options.target_rms,
        segments,
        affordance_mode_default: options.affordance_mode,
        emphasized_joints: options.emphasized_joints.clone(),
        assets: AssetPaths::default(),
        clipping: ClipCounts {
            music: music.clipped,
            beat: clicks.clipped + beat.clipped,
            mixed: mixed.clipped,
        },
    };
    Ok(LearningBundle {
        manifest,
        mixed: mixed.track,
        music: music.track,
        beat: beat.track,
        pose: reference,
        affordance,
    })
}

fn segments_match(a: &[EightCountSegment], b: &[EightCountSegment]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.index == y.index
                && x.beat_indices == y.beat_indices
                && x.partial == y.partial
                && (x.start_s - y.start_s).abs() <= SEGMENT_TOLERANCE
                && (x.end_s - y.end_s).abs() <= SEGMENT_TOLERANCE
        })
}

fn check_asset_path(rel: &str) -> Result<(), BundleError> {
    let path = Path::new(rel);
    let safe = !rel.is_empty() && path.components().all(|c| matches!(c, Component::Normal(_)));
    if safe {
        Ok(())
    } else {
        Err(BundleError::UnsafeAssetPath(rel.to_string()))
    }
}

/// Checks every manifest invariant against the loaded assets. Empty means valid.
pub fn validate_bundle(bundle: &LearningBundle) -> Vec<Violation> {
    let m = &bundle.manifest;
    let mut v = Vec::new();

    if m.format_version != FORMAT_VERSION {
        v.push(Violation::new(
            "format-version",
            format!("format_version {} (expected {FORMAT_VERSION})", m.format_version),
        ));
    }
    if !(m.fps.is_finite() && m.fps > 0.0) {
        v.push(Violation::new("fps", format!("fps {} must be positive", m.fps)));
    }
    match m.beat_grid() {
        Ok(grid) => {
            let fresh = segment_eight_counts(&grid);
            if !segments_match(&m.segments, &fresh) {
                v.push(Violation::new(
                    "segments",
                    format!(
                        "manifest lists {} segments; bpm {} / offset {} / duration {} gives {}",
                        m.segments.len(),
                        m.bpm,
                        m.offset_s,
                        m.duration_s,
                        fresh.len()
                    ),
                ));
            }
        }
        Err(e) => v.push(Violation::new("timeline", e.to_string())),
    }
    for (asset, rel) in m.assets.entries() {
        if check_asset_path(rel).is_err() {
            v.push(Violation::new(
                "asset-path",
                format!("{asset} path `{rel}` escapes the bundle root"),
            ));
        }
    }

    if m.fps.is_finite() && m.fps > 0.0 && m.duration_s.is_finite() {
        let expected = m.expected_frames();
        for (name, len, fps) in [
            ("pose", bundle.pose.len(), bundle.pose.fps()),
            (
                "affordance",
                bundle.affordance.len(),
                bundle.affordance.frames.fps(),
            ),
        ] {
            if len.abs_diff(expected) > 1 {
                v.push(Violation::new(
                    "frame-count",
                    format!("{name} has {len} frames, expected {expected} +/- 1"),
                ));
            }
            if fps != m.fps {
                v.push(Violation::new(
                    "frame-rate",
                    format!("{name} is {fps} fps, manifest says {}", m.fps),
                ));
            }
        }
    }
    if bundle.affordance.len() != bundle.pose.len() {
        v.push(Violation::new(
            "affordance-frames",
            format!(
                "affordance has {} frames, pose has {}",
                bundle.affordance.len(),
                bundle.pose.len()
            ),
        ));
    }
    if bundle.affordance.emphasized_joints != m.emphasized_joints {
        v.push(Violation::new(
            "emphasized-joints",
            "affordance emphasized joints differ from the manifest",
        ));
    }

    let expected_samples = (m.duration_s * m.sample_rate as f64).round();
    for variant in [AudioVariant::Mixed, AudioVariant::Music, AudioVariant::Beat] {
        let track = bundle.audio(variant);
        let name = format!("{variant:?}").to_lowercase();
        if track.sample_rate() != m.sample_rate {
            v.push(Violation::new(
                "sample-rate",
                format!(
                    "{name} audio is {} Hz, manifest says {}",
                    track.sample_rate(),
                    m.sample_rate
                ),
            ));
        }
        if (track.len() as f64 - expected_samples).abs() > 1.0 {
            v.push(Violation::new(
                "audio-length",
                format!(
                    "{name} audio has {} samples, expected {} for {} s",
                    track.len(),
                    expected_samples,
                    m.duration_s
                ),
            ));
        }
    }
    if !(bundle.mixed.len() == bundle.music.len() && bundle.music.len() == bundle.beat.len()) {
        v.push(Violation::new(
            "audio-variants",
            format!(
                "variant lengths differ: mixed {}, music {}, beat {}",
                bundle.mixed.len(),
                bundle.music.len(),
                bundle.beat.len()
            ),
        ));
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WriteOptions {
    pub overwrite: bool,
    pub encoding: WavEncoding,
}

/// Writes the bundle directory. Refuses a non-empty destination unless
/// `overwrite` is set.
pub fn write_bundle(
    bundle: &LearningBundle,
    dest: impl AsRef<Path>,
    options: WriteOptions,
) -> Result<(), BundleError> {
    let dest = dest.as_ref();
    if dest.exists() && fs::read_dir(dest)?.next().is_some() && !options.overwrite {
        return Err(BundleError::DestinationNotEmpty(dest.to_path_buf()));
    }
    let m = &bundle.manifest;
    for (_, rel) in m.assets.entries() {
        check_asset_path(rel)?;
    }
    let write_parent = |rel: &str| -> Result<PathBuf, BundleError> {
        let path = dest.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        Ok(path)
    };
    write_wav_file(&bundle.mixed, write_parent(&m.assets.mixed)?, options.encoding)?;
    write_wav_file(&bundle.music, write_parent(&m.assets.music)?, options.encoding)?;
    write_wav_file(&bundle.beat, write_parent(&m.assets.beat)?, options.encoding)?;
    fs::write(
        write_parent(&m.assets.pose)?,
        serialize_pose_sequence(&bundle.pose),
    )?;
    fs::write(
        write_parent(&m.assets.affordance)?,
        serialize_affordance_track(&bundle.affordance),
    )?;
    fs::create_dir_all(dest)?;
    fs::write(dest.join(MANIFEST_FILE), m.to_canonical_json())?;
    Ok(())
}

/// Parses `manifest.json` under `root`, rejecting newer format versions.
pub fn read_manifest(root: impl AsRef<Path>) -> Result<BundleManifest, BundleError> {
    let bytes = fs::read(root.as_ref().join(MANIFEST_FILE))?;
    let value: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|e| BundleError::Manifest(e.to_string()))?;
    if let Some(version) = value.get("format_version").and_then(|v| v.as_u64()) {
        if version > FORMAT_VERSION as u64 {
            return Err(BundleError::UnsupportedVersion {
                found: version as u32,
            });
        }
    }
    serde_json::from_value(value).map_err(|e| BundleError::Manifest(e.to_string()))
}

/// Loads every asset without running [`validate_bundle`].
pub fn load_bundle(root: impl AsRef<Path>) -> Result<LearningBundle, BundleError> {
    let root = root.as_ref();
    let manifest = read_manifest(root)?;
    let mut paths = Vec::new();
    for (asset, rel) in manifest.assets.entries() {
        check_asset_path(rel)?;
        let path = root.join(rel);
        if !path.is_file() {
            return Err(BundleError::MissingAsset {
                asset: asset.to_string(),
                path,
            });
        }
        paths.push(path);
    }
    let wrap = |asset: &str, e: BundleError| BundleError::Asset {
        asset: asset.to_string(),
        source: Box::new(e),
    };
    let audio = |asset: &str, path: &Path| {
        read_wav_file(path)
            .map(|c| c.track)
            .map_err(|e| wrap(asset, e.into()))
    };
    let skeleton = Skeleton::canonical();
    let mixed = audio("mixed", &paths[0])?;
    let music = audio("music", &paths[1])?;
    let beat = audio("beat", &paths[2])?;
    let pose = parse_pose_sequence(&fs::read(&paths[3])?, &skeleton).map_err(|e| wrap("pose", e.into()))?;
    let affordance =
        parse_affordance_track(&fs::read(&paths[4])?, &skeleton).map_err(|e| wrap("affordance", e.into()))?;
    Ok(LearningBundle {
        manifest,
        mixed,
        music,
        beat,
        pose,
        affordance,
    })
}

/// Loads and validates a bundle directory.
pub fn read_bundle(root: impl AsRef<Path>) -> Result<LearningBundle, BundleError> {
    let bundle = load_bundle(root)?;
    let violations = validate_bundle(&bundle);
    if violations.is_empty() {
        Ok(bundle)
    } else {
        Err(BundleError::Invalid(violations))
    }
}
