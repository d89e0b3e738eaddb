use eightcount_core::motion::{
    limb_lengths, parse_pose_sequence, resample_sequence, serialize_pose_sequence, smooth_sequence,
    PoseFrame, PoseSequence, Skeleton, JOINT_COUNT,
};
use eightcount_core::Vec3;
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = f64> {
    -2.0f64..2.0
}

fn frame_positions() -> impl Strategy<Value = Vec<Vec3>> {
    prop::collection::vec(
        (coord(), coord(), coord()).prop_map(|(x, y, z)| Vec3::new(x, y, z)),
        JOINT_COUNT,
    )
}

fn sequence(max_frames: usize) -> impl Strategy<Value = PoseSequence> {
    (
        prop::collection::vec(frame_positions(), 1..max_frames),
        prop::sample::select(vec![10.0, 24.0, 25.0, 29.97, 30.0, 60.0]),
    )
        .prop_map(|(frames, fps)| PoseSequence::from_positions(Skeleton::canonical(), fps, frames).unwrap())
}

/// Independent oracle: evaluate the piecewise-linear path at time `t` by
/// scanning for the bracketing pair of input frames.
fn lerp_oracle(seq: &PoseSequence, t: f64, joint: usize) -> Vec3 {
    let frames = seq.frames();
    for w in frames.windows(2) {
        if w[0].t <= t && t <= w[1].t {
            let u = (t - w[0].t) / (w[1].t - w[0].t);
            let (a, b) = (w[0].positions[joint], w[1].positions[joint]);
            return Vec3::new(
                a.x + u * (b.x - a.x),
                a.y + u * (b.y - a.y),
                a.z + u * (b.z - a.z),
            );
        }
    }
    frames.last().unwrap().positions[joint]
}

#[test]
fn resample_30_to_60_matches_brute_force_oracle() {
    let s = Skeleton::canonical();
    let frames: Vec<Vec<Vec3>> = (0..31)
        .map(|i| {
            (0..JOINT_COUNT)
                .map(|j| {
                    let t = i as f64;
                    Vec3::new(
                        (t * 0.37 + j as f64).sin(),
                        (t * 0.11).cos() * j as f64,
                        t * t * 0.01,
                    )
                })
                .collect()
        })
        .collect();
    let seq = PoseSequence::from_positions(s, 30.0, frames).unwrap();
    let up = resample_sequence(&seq, 60.0).unwrap();
    assert_eq!(up.len(), 61);
    assert_eq!(up.fps(), 60.0);
    for j in [1usize, 13, 30, 47, 59] {
        let t = j as f64 / 60.0;
        for joint in [0, 7, 20, 23] {
            let want = lerp_oracle(&seq, t, joint);
            let got = up.frames()[j].positions[joint];
            assert!((got - want).norm() < 1e-12, "frame {j} joint {joint}");
        }
    }
    assert_eq!(up.frames()[0].positions, seq.frames()[0].positions);
    assert_eq!(up.frames()[60].positions, seq.frames()[30].positions);
}

#[test]
fn limb_lengths_match_distance_oracle() {
    let s = Skeleton::canonical();
    let positions: Vec<Vec3> = (0..JOINT_COUNT)
        .map(|j| Vec3::new(j as f64 * 0.3, (j as f64).sqrt(), -(j as f64) * 0.07))
        .collect();
    let frame = PoseFrame::new(0.0, positions.clone());
    let lengths = limb_lengths(&frame, &s);
    for (b, bone) in s.bones().iter().enumerate() {
        let (p, c) = (positions[bone.parent], positions[bone.child]);
        let d = ((p.x - c.x).powi(2) + (p.y - c.y).powi(2) + (p.z - c.z).powi(2)).sqrt();
        assert_eq!(lengths.get(b), d);
    }
}

fn rotate(v: Vec3, yaw: f64, pitch: f64) -> Vec3 {
    let (sy, cy) = yaw.sin_cos();
    let v = Vec3::new(cy * v.x + sy * v.z, v.y, -sy * v.x + cy * v.z);
    let (sp, cp) = pitch.sin_cos();
    Vec3::new(v.x, cp * v.y - sp * v.z, sp * v.y + cp * v.z)
}

proptest! {
    #[test]
    fn resample_at_same_fps_is_identity(seq in sequence(20)) {
        let out = resample_sequence(&seq, seq.fps()).unwrap();
        prop_assert_eq!(&out, &seq);
        let again = resample_sequence(&out, seq.fps()).unwrap();
        prop_assert_eq!(again, out);
    }

    #[test]
    fn resample_keeps_first_frame(seq in sequence(20), target in 1.0f64..120.0) {
        let out = resample_sequence(&seq, target).unwrap();
        prop_assert_eq!(&out.frames()[0].positions, &seq.frames()[0].positions);
        prop_assert!(out.duration() <= seq.duration() + 1e-9);
        prop_assert!(seq.duration() - out.duration() < 1.0 / target + 1e-9);
    }

    #[test]
    fn smoothing_stays_within_input_range(seq in sequence(30), alpha in 0.01f64..=1.0) {
        let out = smooth_sequence(&seq, alpha).unwrap();
        for joint in 0..JOINT_COUNT {
            for axis in 0..3 {
                let coords = |s: &PoseSequence| -> Vec<f64> {
                    s.frames().iter().map(|f| f.positions[joint].to_array()[axis]).collect()
                };
                let input = coords(&seq);
                let lo = input.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = input.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                for y in coords(&out) {
                    prop_assert!(y >= lo - 1e-12 && y <= hi + 1e-12);
                }
            }
        }
    }

    #[test]
    fn smoothing_constant_is_fixed_point(p in frame_positions(), n in 1usize..10, alpha in 0.01f64..=1.0) {
        let seq = PoseSequence::from_positions(Skeleton::canonical(), 30.0, vec![p; n]).unwrap();
        let out = smooth_sequence(&seq, alpha).unwrap();
        for (a, b) in out.frames().iter().zip(seq.frames()) {
            for (x, y) in a.positions.iter().zip(&b.positions) {
                prop_assert!((*x - *y).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn limb_lengths_invariant_under_rigid_motion(
        p in frame_positions(),
        yaw in -3.2f64..3.2,
        pitch in -3.2f64..3.2,
        shift in (coord(), coord(), coord()),
    ) {
        let s = Skeleton::canonical();
        let delta = Vec3::new(shift.0, shift.1, shift.2);
        let moved: Vec<Vec3> = p.iter().map(|&v| rotate(v, yaw, pitch) + delta).collect();
        let a = limb_lengths(&PoseFrame::new(0.0, p), &s);
        let b = limb_lengths(&PoseFrame::new(0.0, moved), &s);
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn pose_json_round_trips(seq in sequence(10)) {
        let text = serialize_pose_sequence(&seq);
        let back = parse_pose_sequence(text.as_bytes(), &Skeleton::canonical()).unwrap();
        prop_assert_eq!(back, seq);
    }
}
