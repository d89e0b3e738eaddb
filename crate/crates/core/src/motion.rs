//! Skeleton definition and pose-sequence handling.
//!
//! Poses are absolute 3D joint positions in meters for the canonical
//! 24-joint hierarchy. Sequences are uniformly sampled: frame `i` sits at
//! `i / fps` seconds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vec3::Vec3;

/// Number of joints in the canonical skeleton.
pub const JOINT_COUNT: usize = 24;
/// Number of bones (parent/child pairs) in the canonical skeleton.
pub const BONE_COUNT: usize = JOINT_COUNT - 1;

/// Tolerance on `t_i = i / fps` for uniformly sampled sequences.
pub const TIMESTAMP_TOLERANCE: f64 = 1e-9;

/// Default EMA coefficient for live pose smoothing.
pub const DEFAULT_SMOOTHING_ALPHA: f64 = 0.5;

/// Canonical joint names, in storage order.
pub const CANONICAL_JOINTS: [&str; JOINT_COUNT] = [
    "pelvis",
    "left_hip",
    "right_hip",
    "spine1",
    "left_knee",
    "right_knee",
    "spine2",
    "left_ankle",
    "right_ankle",
    "spine3",
    "left_foot",
    "right_foot",
    "neck",
    "left_collar",
    "right_collar",
    "head",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hand",
    "right_hand",
];

/// Parent index of each canonical joint; `None` marks the root.
pub const CANONICAL_PARENTS: [Option<usize>; JOINT_COUNT] = [
    None,
    Some(0),
    Some(0),
    Some(0),
    Some(1),
    Some(2),
    Some(3),
    Some(4),
    Some(5),
    Some(6),
    Some(7),
    Some(8),
    Some(9),
    Some(9),
    Some(9),
    Some(12),
    Some(13),
    Some(14),
    Some(16),
    Some(17),
    Some(18),
    Some(19),
    Some(20),
    Some(21),
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MotionError {
    #[error("malformed pose data: {0}")]
    Malformed(String),
    #[error("expected {expected} joints, found {found}")]
    JointCount { expected: usize, found: usize },
    #[error("joint {index}: expected `{expected}`, found `{found}`")]
    JointNameMismatch {
        index: usize,
        expected: String,
        found: String,
    },
    #[error("timestamps are not strictly increasing at frame {index}")]
    NonMonotonicTimestamps { index: usize },
    #[error("frame {index} timestamp {found} does not match {expected} (= index / fps)")]
    NonUniformTimestamps { index: usize, expected: f64, found: f64 },
    #[error("fps must be positive and finite, got {0}")]
    InvalidFps(f64),
    #[error("pose sequence has no frames")]
    Empty,
    #[error("frame {frame} has {found} joint positions, expected {expected}")]
    FrameShape {
        frame: usize,
        expected: usize,
        found: usize,
    },
    #[error("frame {frame}, joint {joint}: non-finite coordinate")]
    NonFinite { frame: usize, joint: usize },
    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),
    #[error("smoothing alpha must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("target fps must be positive and finite, got {0}")]
    InvalidTargetFps(f64),
    #[error("bone length map needs {expected} non-negative entries")]
    InvalidBoneLengths { expected: usize },
}

/// A parent/child joint pair, by joint index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bone {
    pub parent: usize,
    pub child: usize,
}

/// Joint hierarchy: a tree of exactly [`JOINT_COUNT`] named joints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    joints: Vec<String>,
    parents: Vec<Option<usize>>,
    bones: Vec<Bone>,
    /// Joint indices ordered so every parent precedes its children.
    order: Vec<usize>,
    root: usize,
}

impl Skeleton {
    /// Builds and validates a skeleton from joint names and a parent table.
    pub fn new(joints: Vec<String>, parents: Vec<Option<usize>>) -> Result<Self, MotionError> {
        if joints.len() != JOINT_COUNT {
            return Err(MotionError::JointCount {
                expected: JOINT_COUNT,
                found: joints.len(),
            });
        }
        if parents.len() != joints.len() {
            return Err(MotionError::InvalidSkeleton(format!(
                "{} parent entries for {} joints",
                parents.len(),
                joints.len()
            )));
        }
        for (i, name) in joints.iter().enumerate() {
            if joints[..i].contains(name) {
                return Err(MotionError::InvalidSkeleton(format!("duplicate joint `{name}`")));
            }
        }
        let roots: Vec<usize> = (0..parents.len()).filter(|&i| parents[i].is_none()).collect();
        let root = match roots.as_slice() {
            [r] => *r,
            _ => {
                return Err(MotionError::InvalidSkeleton(format!(
                    "expected exactly one root, found {}",
                    roots.len()
                )))
            }
        };
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); joints.len()];
        for (child, parent) in parents.iter().enumerate() {
            if let Some(p) = *parent {
                if p >= joints.len() || p == child {
                    return Err(MotionError::InvalidSkeleton(format!(
                        "joint `{}` has invalid parent index {p}",
                        joints[child]
                    )));
                }
                children[p].push(child);
            }
        }
        // Breadth-first walk from the root; a tree reaches every joint exactly once.
        let mut order = Vec::with_capacity(joints.len());
        let mut queue = std::collections::VecDeque::from([root]);
        let mut seen = vec![false; joints.len()];
        seen[root] = true;
        while let Some(j) = queue.pop_front() {
            order.push(j);
            for &c in &children[j] {
                if !seen[c] {
                    seen[c] = true;
                    queue.push_back(c);
                }
            }
        }
        if order.len() != joints.len() {
            return Err(MotionError::InvalidSkeleton(
                "parent graph is not a tree rooted at the root joint".into(),
            ));
        }
        let bones = order
            .iter()
            .filter_map(|&c| parents[c].map(|p| Bone { parent: p, child: c }))
            .collect();
        Ok(Self {
            joints,
            parents,
            bones,
            order,
            root,
        })
    }

    /// The canonical 24-joint body hierarchy rooted at the pelvis.
    pub fn canonical() -> Self {
        Self::new(
            CANONICAL_JOINTS.iter().map(|s| s.to_string()).collect(),
            CANONICAL_PARENTS.to_vec(),
        )
        .expect("canonical skeleton is valid")
    }

    pub fn joints(&self) -> &[String] {
        &self.joints
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        self.parents[joint]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Bones in topological order (each parent joint placed before its children).
    pub fn bones(&self) -> &[Bone] {
        &self.bones
    }

    /// Joint indices in topological order, root first.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j == name)
    }

    /// Human-readable bone label, `parent->child`.
    pub fn bone_name(&self, bone: Bone) -> String {
        format!("{}->{}", self.joints[bone.parent], self.joints[bone.child])
    }
}

impl Default for Skeleton {
    fn default() -> Self {
        Self::canonical()
    }
}

/// One timestamped pose: a position per skeleton joint, in skeleton order.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseFrame {
    pub t: f64,
    pub positions: Vec<Vec3>,
}

impl PoseFrame {
    pub fn new(t: f64, positions: Vec<Vec3>) -> Self {
        Self { t, positions }
    }

    /// Checks the frame against a skeleton: joint count, finite coordinates, `t >= 0`.
    pub fn validate(&self, skeleton: &Skeleton, frame: usize) -> Result<(), MotionError> {
        if self.positions.len() != skeleton.joint_count() {
            return Err(MotionError::FrameShape {
                frame,
                expected: skeleton.joint_count(),
                found: self.positions.len(),
            });
        }
        if let Some(joint) = self.positions.iter().position(|p| !p.is_finite()) {
            return Err(MotionError::NonFinite { frame, joint });
        }
        if !(self.t.is_finite() && self.t >= 0.0) {
            return Err(MotionError::Malformed(format!(
                "frame {frame} has invalid timestamp {}",
                self.t
            )));
        }
        Ok(())
    }

    /// Copy of the frame with every joint moved by `delta`.
    pub fn translated(&self, delta: Vec3) -> PoseFrame {
        PoseFrame::new(self.t, self.positions.iter().map(|&p| p + delta).collect())
    }
}

/// Uniformly sampled pose animation.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    skeleton: Skeleton,
    fps: f64,
    frames: Vec<PoseFrame>,
}

impl PoseSequence {
    /// Validates and wraps frames whose timestamps already satisfy `t_i = i / fps`.
    pub fn new(skeleton: Skeleton, fps: f64, frames: Vec<PoseFrame>) -> Result<Self, MotionError> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(MotionError::InvalidFps(fps));
        }
        if frames.is_empty() {
            return Err(MotionError::Empty);
        }
        for (i, f) in frames.iter().enumerate() {
            f.validate(&skeleton, i)?;
            if i > 0 && f.t <= frames[i - 1].t {
                return Err(MotionError::NonMonotonicTimestamps { index: i });
            }
            let expected = i as f64 / fps;
            if (f.t - expected).abs() > TIMESTAMP_TOLERANCE {
                return Err(MotionError::NonUniformTimestamps {
                    index: i,
                    expected,
                    found: f.t,
                });
            }
        }
        Ok(Self {
            skeleton,
            fps,
            frames,
        })
    }

    /// Builds a sequence from per-frame joint positions, stamping `t_i = i / fps`.
    pub fn from_positions(
        skeleton: Skeleton,
        fps: f64,
        positions: Vec<Vec<Vec3>>,
    ) -> Result<Self, MotionError> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(MotionError::InvalidFps(fps));
        }
        let frames = positions
            .into_iter()
            .enumerate()
            .map(|(i, p)| PoseFrame::new(i as f64 / fps, p))
            .collect();
        Self::new(skeleton, fps, frames)
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn frames(&self) -> &[PoseFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Time of the last frame, `(n - 1) / fps`.
    pub fn duration(&self) -> f64 {
        (self.frames.len() - 1) as f64 / self.fps
    }

    /// Pose at a fractional frame index, linearly interpolated and clamped to the ends.
    fn positions_at_index(&self, s: f64) -> Vec<Vec3> {
        let last = self.frames.len() - 1;
        if s <= 0.0 {
            return self.frames[0].positions.clone();
        }
        if s >= last as f64 {
            return self.frames[last].positions.clone();
        }
        let i0 = s.floor() as usize;
        let frac = s - i0 as f64;
        if frac == 0.0 {
            return self.frames[i0].positions.clone();
        }
        let (a, b) = (&self.frames[i0].positions, &self.frames[i0 + 1].positions);
        a.iter().zip(b).map(|(&p, &q)| p.lerp(q, frac)).collect()
    }

    /// Joint positions at time `t`, linearly interpolated; times outside the
    /// sequence hold the first or last frame.
    pub fn positions_at(&self, t: f64) -> Vec<Vec3> {
        self.positions_at_index(t * self.fps)
    }

    /// Samples `frame_count` frames at `target_fps` starting at `start_s`,
    /// re-stamped from zero.
    pub fn window(
        &self,
        start_s: f64,
        frame_count: usize,
        target_fps: f64,
    ) -> Result<PoseSequence, MotionError> {
        if !(target_fps.is_finite() && target_fps > 0.0) {
            return Err(MotionError::InvalidTargetFps(target_fps));
        }
        let positions = (0..frame_count)
            .map(|j| self.positions_at(start_s + j as f64 / target_fps))
            .collect();
        PoseSequence::from_positions(self.skeleton.clone(), target_fps, positions)
    }
}

#[derive(Deserialize)]
struct PoseFile {
    fps: f64,
    joints: Vec<String>,
    frames: Vec<Vec<[f64; 3]>>,
    #[serde(default)]
    timestamps: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct PoseFileOut<'a> {
    fps: f64,
    joints: &'a [String],
    frames: Vec<Vec<[f64; 3]>>,
}

/// Parses the pose-JSON format against an expected skeleton.
///
/// The optional top-level `timestamps` array, when present, must be strictly
/// increasing and agree with `i / fps`.
pub fn parse_pose_sequence(data: &[u8], expected: &Skeleton) -> Result<PoseSequence, MotionError> {
    let file: PoseFile = serde_json::from_slice(data).map_err(|e| MotionError::Malformed(e.to_string()))?;
    if !(file.fps.is_finite() && file.fps > 0.0) {
        return Err(MotionError::InvalidFps(file.fps));
    }
    if file.joints.len() != expected.joint_count() {
        return Err(MotionError::JointCount {
            expected: expected.joint_count(),
            found: file.joints.len(),
        });
    }
    for (index, (found, want)) in file.joints.iter().zip(expected.joints()).enumerate() {
        if found != want {
            return Err(MotionError::JointNameMismatch {
                index,
                expected: want.clone(),
                found: found.clone(),
            });
        }
    }
    if file.frames.is_empty() {
        return Err(MotionError::Empty);
    }
    let times: Vec<f64> = match file.timestamps {
        Some(ts) => {
            if ts.len() != file.frames.len() {
                return Err(MotionError::Malformed(format!(
                    "{} timestamps for {} frames",
                    ts.len(),
                    file.frames.len()
                )));
            }
            // Providers may stamp frames themselves; accept only the uniform grid,
            // but store the canonical i / fps values.
            for i in 1..ts.len() {
                if ts[i].partial_cmp(&ts[i - 1]) != Some(std::cmp::Ordering::Greater) {
                    return Err(MotionError::NonMonotonicTimestamps { index: i });
                }
            }
            for (i, &t) in ts.iter().enumerate() {
                let expected = i as f64 / file.fps;
                if (t - expected).abs() > TIMESTAMP_TOLERANCE {
                    return Err(MotionError::NonUniformTimestamps {
                        index: i,
                        expected,
                        found: t,
                    });
                }
            }
            (0..ts.len()).map(|i| i as f64 / file.fps).collect()
        }
        None => (0..file.frames.len()).map(|i| i as f64 / file.fps).collect(),
    };
    let frames = file
        .frames
        .into_iter()
        .zip(times)
        .map(|(f, t)| PoseFrame::new(t, f.into_iter().map(Vec3::from).collect()))
        .collect();
    PoseSequence::new(expected.clone(), file.fps, frames)
}

/// Serializes a sequence as pose-JSON (compact, deterministic).
pub fn serialize_pose_sequence(seq: &PoseSequence) -> String {
    let out = PoseFileOut {
        fps: seq.fps,
        joints: seq.skeleton.joints(),
        frames: seq
            .frames
            .iter()
            .map(|f| f.positions.iter().map(|p| p.to_array()).collect())
            .collect(),
    };
    serde_json::to_string(&out).expect("pose sequence serializes")
}

/// Resamples to `target_fps` by per-coordinate linear interpolation.
///
/// The output covers `[0, duration]` on the `j / target_fps` grid. The first
/// frame is always copied exactly; the last input frame is copied exactly
/// whenever the duration is a whole number of output periods.
pub fn resample_sequence(seq: &PoseSequence, target_fps: f64) -> Result<PoseSequence, MotionError> {
    if !(target_fps.is_finite() && target_fps > 0.0) {
        return Err(MotionError::InvalidTargetFps(target_fps));
    }
    if target_fps == seq.fps {
        return Ok(seq.clone());
    }
    let last = seq.frames.len() - 1;
    let span = last as f64 * target_fps / seq.fps;
    let out_last = (span + TIMESTAMP_TOLERANCE).floor() as usize;
    let positions = (0..=out_last)
        .map(|j| {
            if j == out_last && (span - out_last as f64).abs() <= TIMESTAMP_TOLERANCE {
                seq.frames[last].positions.clone()
            } else {
                seq.positions_at_index(j as f64 * seq.fps / target_fps)
            }
        })
        .collect();
    PoseSequence::from_positions(seq.skeleton.clone(), target_fps, positions)
}

/// Stateful per-coordinate exponential moving average for live pose frames.
#[derive(Debug, Clone)]
pub struct PoseSmoother {
    alpha: f64,
    state: Option<Vec<Vec3>>,
}

impl PoseSmoother {
    pub fn new(alpha: f64) -> Result<Self, MotionError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(MotionError::InvalidAlpha(alpha));
        }
        Ok(Self { alpha, state: None })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn reset(&mut self) {
        self.state = None;
    }

    /// Feeds one frame and returns the smoothed frame (same timestamp).
    pub fn push(&mut self, frame: &PoseFrame) -> PoseFrame {
        let a = self.alpha;
        let next: Vec<Vec3> = match &self.state {
            Some(prev) if prev.len() == frame.positions.len() => frame
                .positions
                .iter()
                .zip(prev)
                .map(|(&x, &y)| x * a + y * (1.0 - a))
                .collect(),
            _ => frame.positions.clone(),
        };
        self.state = Some(next.clone());
        PoseFrame::new(frame.t, next)
    }
}

impl Default for PoseSmoother {
    fn default() -> Self {
        Self::new(DEFAULT_SMOOTHING_ALPHA).expect("default alpha in range")
    }
}

/// Applies the EMA `y_0 = x_0; y_i = alpha * x_i + (1 - alpha) * y_{i-1}` to every coordinate.
pub fn smooth_sequence(seq: &PoseSequence, alpha: f64) -> Result<PoseSequence, MotionError> {
    let mut smoother = PoseSmoother::new(alpha)?;
    let frames = seq.frames.iter().map(|f| smoother.push(f)).collect();
    PoseSequence::new(seq.skeleton.clone(), seq.fps, frames)
}

/// Per-bone lengths in meters, aligned with [`Skeleton::bones`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoneLengthMap {
    lengths: Vec<f64>,
}

impl BoneLengthMap {
    pub fn new(lengths: Vec<f64>) -> Result<Self, MotionError> {
        if lengths.len() != BONE_COUNT || lengths.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(MotionError::InvalidBoneLengths { expected: BONE_COUNT });
        }
        Ok(Self { lengths })
    }

    /// Length of the bone at position `index` of [`Skeleton::bones`].
    pub fn get(&self, index: usize) -> f64 {
        self.lengths[index]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.lengths
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    /// Lengths keyed by `parent->child` bone label.
    pub fn to_named(&self, skeleton: &Skeleton) -> BTreeMap<String, f64> {
        skeleton
            .bones()
            .iter()
            .zip(&self.lengths)
            .map(|(&b, &l)| (skeleton.bone_name(b), l))
            .collect()
    }

    /// Inverse of [`BoneLengthMap::to_named`].
    pub fn from_named(skeleton: &Skeleton, named: &BTreeMap<String, f64>) -> Result<Self, MotionError> {
        let lengths = skeleton
            .bones()
            .iter()
            .map(|&b| {
                named
                    .get(&skeleton.bone_name(b))
                    .copied()
                    .ok_or(MotionError::InvalidBoneLengths { expected: BONE_COUNT })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(lengths)
    }
}

/// Euclidean length of every bone in a frame.
pub fn limb_lengths(frame: &PoseFrame, skeleton: &Skeleton) -> BoneLengthMap {
    let lengths = skeleton
        .bones()
        .iter()
        .map(|b| frame.positions[b.parent].distance(frame.positions[b.child]))
        .collect();
    BoneLengthMap { lengths }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_frame(p: Vec3) -> Vec<Vec3> {
        vec![p; JOINT_COUNT]
    }

    fn pose_json(fps: f64, joints: &[&str], frames: usize) -> String {
        let frame: Vec<[f64; 3]> = (0..joints.len()).map(|j| [j as f64, 0.0, 0.0]).collect();
        serde_json::json!({
            "fps": fps,
            "joints": joints,
            "frames": vec![frame; frames],
        })
        .to_string()
    }

    #[test]
    fn canonical_skeleton_shape() {
        let s = Skeleton::canonical();
        assert_eq!(s.joint_count(), 24);
        assert_eq!(s.bones().len(), 23);
        assert_eq!(s.root(), 0);
        assert_eq!(s.joints()[s.root()], "pelvis");
        let order = s.topological_order();
        for b in s.bones() {
            let pp = order.iter().position(|&j| j == b.parent).unwrap();
            let pc = order.iter().position(|&j| j == b.child).unwrap();
            assert!(pp < pc);
        }
    }

    #[test]
    fn rejects_cyclic_or_multi_root_skeletons() {
        let names: Vec<String> = CANONICAL_JOINTS.iter().map(|s| s.to_string()).collect();
        let mut parents = CANONICAL_PARENTS.to_vec();
        parents[5] = None;
        assert!(matches!(
            Skeleton::new(names.clone(), parents),
            Err(MotionError::InvalidSkeleton(_))
        ));
        let mut parents = CANONICAL_PARENTS.to_vec();
        // 1 -> 4 -> 7 -> 10, close a loop 1 <- 10.
        parents[1] = Some(10);
        parents[3] = None;
        parents[0] = Some(3);
        assert!(Skeleton::new(names, parents).is_err());
    }

    #[test]
    fn parse_single_frame() {
        let s = Skeleton::canonical();
        let seq = parse_pose_sequence(pose_json(30.0, &CANONICAL_JOINTS, 1).as_bytes(), &s).unwrap();
        assert_eq!(seq.len(), 1);
        assert_eq!(seq.duration(), 0.0);
    }

    #[test]
    fn parse_rejects_23_joints() {
        let s = Skeleton::canonical();
        let err =
            parse_pose_sequence(pose_json(30.0, &CANONICAL_JOINTS[..23], 1).as_bytes(), &s).unwrap_err();
        assert_eq!(
            err,
            MotionError::JointCount {
                expected: 24,
                found: 23
            }
        );
    }

    #[test]
    fn parse_ninety_frames_timestamps() {
        let s = Skeleton::canonical();
        let seq = parse_pose_sequence(pose_json(30.0, &CANONICAL_JOINTS, 90).as_bytes(), &s).unwrap();
        assert_eq!(seq.len(), 90);
        let last = seq.frames().last().unwrap().t;
        assert!((last - 89.0 / 30.0).abs() < 1e-12);
        assert!((seq.duration() - 2.966_666_666_666_667).abs() < 1e-12);
    }

    #[test]
    fn parse_error_paths() {
        let s = Skeleton::canonical();
        assert!(matches!(
            parse_pose_sequence(b"{not json", &s),
            Err(MotionError::Malformed(_))
        ));
        assert!(matches!(
            parse_pose_sequence(pose_json(0.0, &CANONICAL_JOINTS, 2).as_bytes(), &s),
            Err(MotionError::InvalidFps(_))
        ));
        assert!(matches!(
            parse_pose_sequence(pose_json(-30.0, &CANONICAL_JOINTS, 2).as_bytes(), &s),
            Err(MotionError::InvalidFps(_))
        ));
        assert_eq!(
            parse_pose_sequence(pose_json(30.0, &CANONICAL_JOINTS, 0).as_bytes(), &s),
            Err(MotionError::Empty)
        );
        let mut swapped = CANONICAL_JOINTS;
        swapped.swap(1, 2);
        assert!(matches!(
            parse_pose_sequence(pose_json(30.0, &swapped, 1).as_bytes(), &s),
            Err(MotionError::JointNameMismatch { index: 1, .. })
        ));

        let frame: Vec<[f64; 3]> = vec![[0.0; 3]; 24];
        let doc = serde_json::json!({
            "fps": 10.0, "joints": CANONICAL_JOINTS, "frames": [frame, frame, frame],
            "timestamps": [0.0, 0.2, 0.1],
        });
        assert_eq!(
            parse_pose_sequence(doc.to_string().as_bytes(), &s),
            Err(MotionError::NonMonotonicTimestamps { index: 2 })
        );
        let doc = serde_json::json!({
            "fps": 10.0, "joints": CANONICAL_JOINTS, "frames": [frame, frame],
            "timestamps": [0.0, 0.15],
        });
        assert!(matches!(
            parse_pose_sequence(doc.to_string().as_bytes(), &s),
            Err(MotionError::NonUniformTimestamps { index: 1, .. })
        ));
        let short: Vec<[f64; 3]> = vec![[0.0; 3]; 5];
        let doc = serde_json::json!({ "fps": 10.0, "joints": CANONICAL_JOINTS, "frames": [short] });
        assert!(matches!(
            parse_pose_sequence(doc.to_string().as_bytes(), &s),
            Err(MotionError::FrameShape { frame: 0, .. })
        ));
    }

    #[test]
    fn resample_identity_and_midpoint() {
        let s = Skeleton::canonical();
        let seq = PoseSequence::from_positions(
            s.clone(),
            1.0,
            vec![flat_frame(Vec3::ZERO), flat_frame(Vec3::new(1.0, 0.0, 0.0))],
        )
        .unwrap();
        assert_eq!(resample_sequence(&seq, 1.0).unwrap(), seq);
        let up = resample_sequence(&seq, 2.0).unwrap();
        assert_eq!(up.len(), 3);
        assert_eq!(up.frames()[1].positions[7], Vec3::new(0.5, 0.0, 0.0));
        assert_eq!(up.frames()[2].positions, seq.frames()[1].positions);
        assert!(matches!(
            resample_sequence(&seq, 0.0),
            Err(MotionError::InvalidTargetFps(_))
        ));
    }

    #[test]
    fn smoothing_step_response() {
        let s = Skeleton::canonical();
        let seq = PoseSequence::from_positions(
            s,
            30.0,
            vec![
                flat_frame(Vec3::ZERO),
                flat_frame(Vec3::new(1.0, 1.0, 1.0)),
                flat_frame(Vec3::new(1.0, 1.0, 1.0)),
                flat_frame(Vec3::new(1.0, 1.0, 1.0)),
            ],
        )
        .unwrap();
        let out = smooth_sequence(&seq, 0.5).unwrap();
        let xs: Vec<f64> = out.frames().iter().map(|f| f.positions[3].x).collect();
        assert_eq!(xs, vec![0.0, 0.5, 0.75, 0.875]);
        assert_eq!(smooth_sequence(&seq, 1.0).unwrap(), seq);
        assert!(matches!(
            smooth_sequence(&seq, 0.0),
            Err(MotionError::InvalidAlpha(_))
        ));
        assert!(smooth_sequence(&seq, 1.5).is_err());
    }

    #[test]
    fn limb_length_basics() {
        let s = Skeleton::canonical();
        let zero = PoseFrame::new(0.0, flat_frame(Vec3::ZERO));
        assert!(limb_lengths(&zero, &s).as_slice().iter().all(|&l| l == 0.0));
        let mut p = flat_frame(Vec3::ZERO);
        p[1] = Vec3::new(3.0, 4.0, 0.0);
        p[4] = Vec3::new(3.0, 4.0, 0.0);
        let lengths = limb_lengths(&PoseFrame::new(0.0, p), &s);
        let named = lengths.to_named(&s);
        assert_eq!(named["pelvis->left_hip"], 5.0);
        assert_eq!(named["left_hip->left_knee"], 0.0);
        assert_eq!(BoneLengthMap::from_named(&s, &named).unwrap(), lengths);
    }

    #[test]
    fn window_samples_and_restamps() {
        let s = Skeleton::canonical();
        let positions = (0..11)
            .map(|i| flat_frame(Vec3::new(i as f64, 0.0, 0.0)))
            .collect();
        let seq = PoseSequence::from_positions(s, 10.0, positions).unwrap();
        let w = seq.window(0.25, 4, 20.0).unwrap();
        assert_eq!(w.len(), 4);
        assert_eq!(w.frames()[0].t, 0.0);
        let xs: Vec<f64> = w.frames().iter().map(|f| f.positions[0].x).collect();
        for (got, want) in xs.iter().zip([2.5, 3.0, 3.5, 4.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        // Past the end holds the last frame.
        assert_eq!(seq.positions_at(5.0)[0].x, 10.0);
    }
}
