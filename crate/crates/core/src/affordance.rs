//! Learner calibration, reference-to-learner retargeting and affordance tracks.
//!
//! Calibration runs once, over a short window of live frames. The resulting
//! [`RetargetTransform`] (per-bone scale plus root translation) is then applied
//! unchanged to every reference frame.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::motion::{limb_lengths, BoneLengthMap, MotionError, PoseFrame, PoseSequence, Skeleton};
use crate::vec3::Vec3;

/// Bones shorter than this (meters) are treated as degenerate.
pub const DEGENERATE_BONE_M: f64 = 1e-3;

/// Frames collected for calibration by default (about one second at 30 fps).
pub const DEFAULT_CALIBRATION_FRAMES: usize = 30;

/// Wrists, hands, ankles and feet.
pub const DEFAULT_EMPHASIZED_JOINTS: [&str; 8] = [
    "left_wrist",
    "right_wrist",
    "left_hand",
    "right_hand",
    "left_ankle",
    "right_ankle",
    "left_foot",
    "right_foot",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AffordanceError {
    #[error("calibration needs at least one frame")]
    NoFrames,
    #[error("degenerate bone `{bone}`: {length_m} m is below {DEGENERATE_BONE_M} m")]
    DegenerateBone { bone: String, length_m: f64 },
    #[error("unknown joint `{0}`")]
    UnknownJoint(String),
    #[error("joints-only mode needs at least one emphasized joint")]
    NothingToDisplay,
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
    #[error(transparent)]
    Motion(#[from] MotionError),
}

/// Learner body measurements taken once at session start.
#[derive(Debug, Clone, PartialEq)]
pub struct UserCalibration {
    pub bone_lengths: BoneLengthMap,
    pub root_reference: Vec3,
    pub frames_used: usize,
}

impl UserCalibration {
    /// Measurements of a single frame (used for the reference avatar's first pose).
    pub fn from_frame(frame: &PoseFrame, skeleton: &Skeleton) -> Self {
        Self {
            bone_lengths: limb_lengths(frame, skeleton),
            root_reference: frame.positions[skeleton.root()],
            frames_used: 1,
        }
    }

    /// First bone below the degenerate threshold, if any.
    pub fn degenerate_bone(&self, skeleton: &Skeleton) -> Option<(String, f64)> {
        skeleton
            .bones()
            .iter()
            .zip(self.bone_lengths.as_slice())
            .find(|(_, &l)| l < DEGENERATE_BONE_M)
            .map(|(&b, &l)| (skeleton.bone_name(b), l))
    }

    /// Serializable summary keyed by bone label.
    pub fn summary(&self, skeleton: &Skeleton) -> CalibrationSummary {
        CalibrationSummary {
            bone_lengths: self.bone_lengths.to_named(skeleton),
            root_reference: self.root_reference,
            frames_used: self.frames_used,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub bone_lengths: BTreeMap<String, f64>,
    pub root_reference: Vec3,
    pub frames_used: usize,
}

impl CalibrationSummary {
    pub fn to_calibration(&self, skeleton: &Skeleton) -> Result<UserCalibration, AffordanceError> {
        Ok(UserCalibration {
            bone_lengths: BoneLengthMap::from_named(skeleton, &self.bone_lengths)?,
            root_reference: self.root_reference,
            frames_used: self.frames_used.max(1),
        })
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Per-bone median length and mean root position over the calibration frames.
pub fn calibrate_user(frames: &[PoseFrame], skeleton: &Skeleton) -> Result<UserCalibration, AffordanceError> {
    if frames.is_empty() {
        return Err(AffordanceError::NoFrames);
    }
    for (i, f) in frames.iter().enumerate() {
        f.validate(skeleton, i)?;
    }
    let per_frame: Vec<BoneLengthMap> = frames.iter().map(|f| limb_lengths(f, skeleton)).collect();
    let lengths = (0..skeleton.bones().len())
        .map(|b| {
            let mut column: Vec<f64> = per_frame.iter().map(|m| m.get(b)).collect();
            median(&mut column)
        })
        .collect();
    let mut root = Vec3::ZERO;
    for f in frames {
        root += f.positions[skeleton.root()];
    }
    let calibration = UserCalibration {
        bone_lengths: BoneLengthMap::new(lengths)?,
        root_reference: root * (1.0 / frames.len() as f64),
        frames_used: frames.len(),
    };
    if let Some((bone, length_m)) = calibration.degenerate_bone(skeleton) {
        return Err(AffordanceError::DegenerateBone { bone, length_m });
    }
    Ok(calibration)
}

/// Maps reference-body poses onto the learner's proportions and position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetargetTransform {
    /// Scale per bone, aligned with [`Skeleton::bones`].
    pub bone_scale: Vec<f64>,
    pub root_offset: Vec3,
}

impl RetargetTransform {
    pub fn identity(skeleton: &Skeleton) -> Self {
        Self {
            bone_scale: vec![1.0; skeleton.bones().len()],
            root_offset: Vec3::ZERO,
        }
    }

    pub fn validate(&self, skeleton: &Skeleton) -> Result<(), AffordanceError> {
        if self.bone_scale.len() != skeleton.bones().len() {
            return Err(AffordanceError::InvalidTransform(format!(
                "{} scales for {} bones",
                self.bone_scale.len(),
                skeleton.bones().len()
            )));
        }
        if self.bone_scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(AffordanceError::InvalidTransform(
                "scales must be finite and positive".into(),
            ));
        }
        if !self.root_offset.is_finite() {
            return Err(AffordanceError::InvalidTransform(
                "root offset must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// `bone_scale[b] = user[b] / reference[b]`, `root_offset = user root - reference root`.
pub fn compute_retarget(
    reference: &UserCalibration,
    user: &UserCalibration,
    skeleton: &Skeleton,
) -> Result<RetargetTransform, AffordanceError> {
    if let Some((bone, length_m)) = reference.degenerate_bone(skeleton) {
        return Err(AffordanceError::DegenerateBone { bone, length_m });
    }
    let bone_scale = user
        .bone_lengths
        .as_slice()
        .iter()
        .zip(reference.bone_lengths.as_slice())
        .map(|(u, r)| u / r)
        .collect();
    let transform = RetargetTransform {
        bone_scale,
        root_offset: user.root_reference - reference.root_reference,
    };
    transform.validate(skeleton)?;
    Ok(transform)
}

/// Re-poses a frame hierarchically: the root moves by the offset, then each
/// child is placed at `parent' + scale * (child - parent)` in topological order.
pub fn retarget_pose(frame: &PoseFrame, transform: &RetargetTransform, skeleton: &Skeleton) -> PoseFrame {
    let src = &frame.positions;
    let mut out = src.clone();
    let root = skeleton.root();
    out[root] = src[root] + transform.root_offset;
    for (b, bone) in skeleton.bones().iter().enumerate() {
        out[bone.child] = out[bone.parent] + (src[bone.child] - src[bone.parent]) * transform.bone_scale[b];
    }
    PoseFrame::new(frame.t, out)
}

/// How affordances are drawn over the learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AffordanceMode {
    /// Markers on the emphasized joints only.
    #[default]
    JointsOnly,
    /// Emphasized joints plus a translucent full body.
    JointsPlusTranslucentBody,
    /// Every body part, opaque.
    FullBody,
    /// Nothing drawn; positions still streamed.
    Invisible,
}

impl AffordanceMode {
    pub const ALL: [AffordanceMode; 4] = [
        AffordanceMode::JointsOnly,
        AffordanceMode::JointsPlusTranslucentBody,
        AffordanceMode::FullBody,
        AffordanceMode::Invisible,
    ];
}

/// Retargeted reference animation with per-joint emphasis.
#[derive(Debug, Clone, PartialEq)]
pub struct AffordanceTrack {
    pub mode: AffordanceMode,
    pub emphasized_joints: Vec<String>,
    /// Emphasis flag per skeleton joint.
    pub emphasis: Vec<bool>,
    pub transform: RetargetTransform,
    pub frames: PoseSequence,
}

impl AffordanceTrack {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Resolves joint names to an emphasis mask.
pub fn emphasis_mask(skeleton: &Skeleton, joints: &[String]) -> Result<Vec<bool>, AffordanceError> {
    let mut mask = vec![false; skeleton.joint_count()];
    for name in joints {
        let i = skeleton
            .joint_index(name)
            .ok_or_else(|| AffordanceError::UnknownJoint(name.clone()))?;
        mask[i] = true;
    }
    Ok(mask)
}

pub fn default_emphasized_joints() -> Vec<String> {
    DEFAULT_EMPHASIZED_JOINTS.iter().map(|s| s.to_string()).collect()
}

/// Retargets every frame of `seq` and attaches display metadata.
pub fn generate_affordance_track(
    seq: &PoseSequence,
    transform: &RetargetTransform,
    mode: AffordanceMode,
    emphasized: &[String],
) -> Result<AffordanceTrack, AffordanceError> {
    let skeleton = seq.skeleton();
    transform.validate(skeleton)?;
    let emphasis = emphasis_mask(skeleton, emphasized)?;
    if mode == AffordanceMode::JointsOnly && emphasized.is_empty() {
        return Err(AffordanceError::NothingToDisplay);
    }
    let frames = seq
        .frames()
        .iter()
        .map(|f| retarget_pose(f, transform, skeleton))
        .collect();
    Ok(AffordanceTrack {
        mode,
        emphasized_joints: emphasized.to_vec(),
        emphasis,
        transform: transform.clone(),
        frames: PoseSequence::new(skeleton.clone(), seq.fps(), frames)?,
    })
}

#[derive(Serialize, Deserialize)]
struct AffordanceFile {
    mode: AffordanceMode,
    emphasized_joints: Vec<String>,
    emphasis: Vec<bool>,
    transform: RetargetTransform,
    fps: f64,
    joints: Vec<String>,
    frames: Vec<Vec<Vec3>>,
}

/// Serializes an affordance track as JSON.
pub fn serialize_affordance_track(track: &AffordanceTrack) -> String {
    let file = AffordanceFile {
        mode: track.mode,
        emphasized_joints: track.emphasized_joints.clone(),
        emphasis: track.emphasis.clone(),
        transform: track.transform.clone(),
        fps: track.frames.fps(),
        joints: track.frames.skeleton().joints().to_vec(),
        frames: track
            .frames
            .frames()
            .iter()
            .map(|f| f.positions.clone())
            .collect(),
    };
    serde_json::to_string(&file).expect("affordance track serializes")
}

pub fn parse_affordance_track(data: &[u8], skeleton: &Skeleton) -> Result<AffordanceTrack, AffordanceError> {
    let file: AffordanceFile = serde_json::from_slice(data)
        .map_err(|e| AffordanceError::Motion(MotionError::Malformed(e.to_string())))?;
    if file.joints.as_slice() != skeleton.joints() {
        return Err(MotionError::Malformed("affordance joints differ from the skeleton".into()).into());
    }
    let emphasis = emphasis_mask(skeleton, &file.emphasized_joints)?;
    if emphasis != file.emphasis {
        return Err(MotionError::Malformed("emphasis flags disagree with emphasized joints".into()).into());
    }
    file.transform.validate(skeleton)?;
    Ok(AffordanceTrack {
        mode: file.mode,
        emphasized_joints: file.emphasized_joints,
        emphasis,
        transform: file.transform,
        frames: PoseSequence::from_positions(skeleton.clone(), file.fps, file.frames)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::JOINT_COUNT;

    /// A simple standing pose with distinct, non-degenerate bones.
    fn standing() -> PoseFrame {
        let s = Skeleton::canonical();
        let mut p = vec![Vec3::ZERO; JOINT_COUNT];
        p[0] = Vec3::new(0.0, 1.0, 0.0);
        for &b in s.bones() {
            let c = b.child as f64;
            p[b.child] = p[b.parent] + Vec3::new(0.01 * c, 0.1 + 0.005 * c, 0.02);
        }
        PoseFrame::new(0.0, p)
    }

    fn named(s: &Skeleton, name: &str) -> usize {
        s.bones()
            .iter()
            .position(|b| s.joints()[b.child] == name)
            .unwrap()
    }

    #[test]
    fn calibrate_single_frame_matches_limb_lengths() {
        let s = Skeleton::canonical();
        let f = standing();
        let c = calibrate_user(std::slice::from_ref(&f), &s).unwrap();
        assert_eq!(c.bone_lengths, limb_lengths(&f, &s));
        assert_eq!(c.root_reference, f.positions[0]);
        assert_eq!(c.frames_used, 1);
    }

    #[test]
    fn calibrate_median_rejects_outlier() {
        let s = Skeleton::canonical();
        let knee = s.joint_index("left_knee").unwrap();
        let hip = s.joint_index("left_hip").unwrap();
        let ankle = s.joint_index("left_ankle").unwrap();
        let frames: Vec<PoseFrame> = [1.0, 1.0, 5.0]
            .iter()
            .map(|&len| {
                let mut f = standing();
                let hip_p = f.positions[hip];
                let shift = hip_p + Vec3::new(0.0, -len, 0.0) - f.positions[knee];
                f.positions[knee] += shift;
                // Keep the shin rigid.
                f.positions[ankle] += shift;
                f.positions[s.joint_index("left_foot").unwrap()] += shift;
                f
            })
            .collect();
        let c = calibrate_user(&frames, &s).unwrap();
        assert!((c.bone_lengths.get(named(&s, "left_knee")) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn calibrate_errors() {
        let s = Skeleton::canonical();
        assert_eq!(calibrate_user(&[], &s), Err(AffordanceError::NoFrames));
        let flat = PoseFrame::new(0.0, vec![Vec3::new(1.0, 2.0, 3.0); JOINT_COUNT]);
        assert!(matches!(
            calibrate_user(&[flat], &s),
            Err(AffordanceError::DegenerateBone { .. })
        ));
    }

    #[test]
    fn identity_and_uniform_retarget() {
        let s = Skeleton::canonical();
        let f = standing();
        let reference = UserCalibration::from_frame(&f, &s);
        let t = compute_retarget(&reference, &reference, &s).unwrap();
        assert!(t.bone_scale.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        assert_eq!(t.root_offset, Vec3::ZERO);
        assert_eq!(retarget_pose(&f, &RetargetTransform::identity(&s), &s), f);

        let doubled = PoseFrame::new(0.0, f.positions.iter().map(|&p| p * 2.0).collect());
        let user = UserCalibration::from_frame(&doubled, &s);
        let t = compute_retarget(&reference, &user, &s).unwrap();
        assert!(t.bone_scale.iter().all(|&x| (x - 2.0).abs() < 1e-12));
    }

    #[test]
    fn uniform_scale_doubles_offsets_from_root() {
        let s = Skeleton::canonical();
        let f = standing();
        let t = RetargetTransform {
            bone_scale: vec![2.0; 23],
            root_offset: Vec3::ZERO,
        };
        let out = retarget_pose(&f, &t, &s);
        let root = f.positions[0];
        for j in 0..JOINT_COUNT {
            let want = root + (f.positions[j] - root) * 2.0;
            assert!((out.positions[j] - want).norm() < 1e-12, "joint {j}");
        }
    }

    #[test]
    fn arm_and_leg_chains_scale_separately() {
        let s = Skeleton::canonical();
        let f = standing();
        let reference = UserCalibration::from_frame(&f, &s);
        let arm = [
            "left_shoulder",
            "right_shoulder",
            "left_elbow",
            "right_elbow",
            "left_wrist",
            "right_wrist",
            "left_hand",
            "right_hand",
        ];
        let leg = [
            "left_hip",
            "right_hip",
            "left_knee",
            "right_knee",
            "left_ankle",
            "right_ankle",
            "left_foot",
            "right_foot",
        ];
        let lengths: Vec<f64> = s
            .bones()
            .iter()
            .zip(reference.bone_lengths.as_slice())
            .map(|(b, &l)| {
                let child = s.joints()[b.child].as_str();
                if arm.contains(&child) {
                    l * 1.1
                } else if leg.contains(&child) {
                    l * 0.9
                } else {
                    l
                }
            })
            .collect();
        let user = UserCalibration {
            bone_lengths: BoneLengthMap::new(lengths).unwrap(),
            root_reference: reference.root_reference,
            frames_used: 30,
        };
        let t = compute_retarget(&reference, &user, &s).unwrap();
        for name in arm {
            assert!((t.bone_scale[named(&s, name)] - 1.1).abs() < 1e-12);
        }
        for name in leg {
            assert!((t.bone_scale[named(&s, name)] - 0.9).abs() < 1e-12);
        }
        assert!((t.bone_scale[named(&s, "neck")] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_reference_is_rejected() {
        let s = Skeleton::canonical();
        let flat = PoseFrame::new(0.0, vec![Vec3::ZERO; JOINT_COUNT]);
        let reference = UserCalibration::from_frame(&flat, &s);
        let user = UserCalibration::from_frame(&standing(), &s);
        assert!(matches!(
            compute_retarget(&reference, &user, &s),
            Err(AffordanceError::DegenerateBone { .. })
        ));
    }

    #[test]
    fn track_generation() {
        let s = Skeleton::canonical();
        let seq = PoseSequence::from_positions(s.clone(), 30.0, vec![standing().positions; 5]).unwrap();
        let id = RetargetTransform::identity(&s);
        let t = generate_affordance_track(&seq, &id, AffordanceMode::Invisible, &default_emphasized_joints())
            .unwrap();
        assert_eq!(t.len(), 5);
        assert_eq!(t.frames, seq);
        assert_eq!(t.emphasis.iter().filter(|&&e| e).count(), 8);

        assert_eq!(
            generate_affordance_track(&seq, &id, AffordanceMode::JointsOnly, &[]),
            Err(AffordanceError::NothingToDisplay)
        );
        assert!(generate_affordance_track(&seq, &id, AffordanceMode::FullBody, &[]).is_ok());
        assert_eq!(
            generate_affordance_track(&seq, &id, AffordanceMode::FullBody, &["tail".to_string()]),
            Err(AffordanceError::UnknownJoint("tail".into()))
        );

        let json = serialize_affordance_track(&t);
        assert_eq!(parse_affordance_track(json.as_bytes(), &s).unwrap(), t);
    }

    #[test]
    fn mode_serializes_snake_case() {
        assert_eq!(
            serde_json::to_string(&AffordanceMode::JointsPlusTranslucentBody).unwrap(),
            "\"joints_plus_translucent_body\""
        );
    }
}
