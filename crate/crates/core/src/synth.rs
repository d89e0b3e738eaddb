//! Deterministic stand-ins for real inputs: a sine "song" and a rigid
//! synthetic dancer. Used for fixtures, demos and the replay pose source.

use std::f64::consts::PI;

use crate::audio::AudioTrack;
use crate::motion::{PoseSequence, Skeleton, CANONICAL_JOINTS, JOINT_COUNT};
use crate::vec3::Vec3;

/// Rest-pose offset of each joint from its parent, meters (Y-up, facing +Z).
const REST_OFFSETS: [[f64; 3]; JOINT_COUNT] = [
    [0.0, 0.95, 0.0],   // pelvis (absolute)
    [0.09, -0.08, 0.0], // left_hip
    [-0.09, -0.08, 0.0],
    [0.0, 0.11, 0.0],  // spine1
    [0.0, -0.38, 0.0], // left_knee
    [0.0, -0.38, 0.0],
    [0.0, 0.13, 0.0],  // spine2
    [0.0, -0.40, 0.0], // left_ankle
    [0.0, -0.40, 0.0],
    [0.0, 0.06, 0.0],   // spine3
    [0.0, -0.05, 0.12], // left_foot
    [0.0, -0.05, 0.12],
    [0.0, 0.21, 0.0],  // neck
    [0.07, 0.11, 0.0], // left_collar
    [-0.07, 0.11, 0.0],
    [0.0, 0.09, 0.03], // head
    [0.11, 0.03, 0.0], // left_shoulder
    [-0.11, 0.03, 0.0],
    [0.26, 0.0, 0.0], // left_elbow
    [-0.26, 0.0, 0.0],
    [0.25, 0.0, 0.0], // left_wrist
    [-0.25, 0.0, 0.0],
    [0.08, 0.0, 0.0], // left_hand
    [-0.08, 0.0, 0.0],
];

/// Full-scale-ish sine at `freq_hz`, amplitude `amp`.
pub fn sine_song(seconds: f64, freq_hz: f64, amp: f64, sample_rate: u32) -> AudioTrack {
    let n = (seconds * sample_rate as f64).round() as usize;
    let samples = (0..n)
        .map(|i| (amp * (2.0 * PI * freq_hz * i as f64 / sample_rate as f64).sin()) as f32)
        .collect();
    AudioTrack::new(sample_rate, samples).expect("amplitude within [-1, 1]")
}

fn rotate_z(v: Vec3, a: f64) -> Vec3 {
    let (s, c) = a.sin_cos();
    Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
}

fn rotate_x(v: Vec3, a: f64) -> Vec3 {
    let (s, c) = a.sin_cos();
    Vec3::new(v.x, c * v.y - s * v.z, s * v.y + c * v.z)
}

/// The rest pose scaled by `scale`, with the root at `root`.
pub fn rest_pose(scale: f64, root: Vec3) -> Vec<Vec3> {
    let skeleton = Skeleton::canonical();
    let mut p = vec![Vec3::ZERO; JOINT_COUNT];
    p[0] = root;
    for b in skeleton.bones() {
        p[b.child] = p[b.parent] + Vec3::from(REST_OFFSETS[b.child]) * scale;
    }
    p
}

/// A dancer bobbing on the beat and swinging arms and legs. Bones are rigid,
/// so every frame has the same limb lengths (`scale` times the rest pose).
pub fn synthetic_dance(frames: usize, fps: f64, bpm: f64, scale: f64) -> PoseSequence {
    let skeleton = Skeleton::canonical();
    let beat_hz = bpm / 60.0;
    let positions = (0..frames)
        .map(|i| {
            let t = i as f64 / fps;
            let w = 2.0 * PI * beat_hz * t;
            let mut p = vec![Vec3::ZERO; JOINT_COUNT];
            p[0] = Vec3::new(0.05 * (w / 4.0).sin(), 0.95 * scale + 0.03 * w.cos(), 0.0);
            for b in skeleton.bones() {
                let name = CANONICAL_JOINTS[b.child];
                let rest = Vec3::from(REST_OFFSETS[b.child]) * scale;
                let side = if name.starts_with("left") { 1.0 } else { -1.0 };
                let offset = if name.contains("elbow") || name.contains("wrist") {
                    rotate_z(rest, side * 0.6 * (w / 2.0).sin())
                } else if name.contains("knee") || name.contains("ankle") {
                    rotate_x(rest, 0.35 * (w / 2.0 + side * PI / 2.0).sin().max(0.0))
                } else {
                    rest
                };
                p[b.child] = p[b.parent] + offset;
            }
            p
        })
        .collect();
    PoseSequence::from_positions(skeleton, fps, positions).expect("synthetic frames are valid")
}
