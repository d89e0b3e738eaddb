//! One learner's live session: the state machine plus learner-side extras
//! (smoothed pose, calibration, retargeting). Synchronous so it can be driven
//! and tested without a socket; the server owns one per connection.

use std::sync::Arc;

use eightcount_core::affordance::{
    calibrate_user, compute_retarget, retarget_pose, AffordanceError, RetargetTransform,
};
use eightcount_core::motion::{MotionError, PoseFrame, PoseSmoother};
use eightcount_core::session::{apply_command, snapshot, tick, SessionState};
use eightcount_core::Vec3;

use crate::protocol::{ClientMessage, FrameMessage, PoseMessage, ServerMessage};
use crate::store::StoredBundle;

pub struct LiveSession {
    bundle: Arc<StoredBundle>,
    state: SessionState,
    smoother: PoseSmoother,
    user_pose: Option<Vec<Vec3>>,
    calibrating: Option<Vec<PoseFrame>>,
    transform: Option<RetargetTransform>,
}

impl LiveSession {
    pub fn new(bundle: Arc<StoredBundle>, smoothing_alpha: f64) -> Result<Self, MotionError> {
        Ok(Self {
            state: SessionState::new(&bundle.context),
            smoother: PoseSmoother::new(smoothing_alpha)?,
            bundle,
            user_pose: None,
            calibrating: None,
            transform: None,
        })
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    /// Live retarget, once the learner has calibrated.
    pub fn transform(&self) -> Option<&RetargetTransform> {
        self.transform.as_ref()
    }

    pub fn state_update(&self) -> ServerMessage {
        match snapshot(&self.state, &self.bundle.context) {
            Ok(s) => ServerMessage::StateUpdate(s),
            Err(e) => ServerMessage::error(e.code(), e.to_string()),
        }
    }

    /// Applies one client message and returns the replies, in order.
    pub fn handle(&mut self, msg: ClientMessage) -> Vec<ServerMessage> {
        match msg {
            ClientMessage::Command(cmd) => match apply_command(&self.state, &cmd, &self.bundle.context) {
                Ok(next) => {
                    self.state = next;
                    vec![self.state_update()]
                }
                Err(e) => vec![ServerMessage::error(e.code(), e.to_string())],
            },
            ClientMessage::UserPoseFrame(p) => match self.frame(p) {
                Ok(frame) => {
                    self.user_pose = Some(self.smoother.push(&frame).positions);
                    vec![]
                }
                Err(e) => vec![invalid_pose(e)],
            },
            ClientMessage::CalibrationStart => {
                self.calibrating = Some(Vec::new());
                vec![]
            }
            ClientMessage::CalibrationFrame(p) => {
                if self.calibrating.is_none() {
                    return vec![not_started()];
                }
                match self.frame(p) {
                    Ok(frame) => {
                        self.calibrating.as_mut().unwrap().push(frame);
                        vec![]
                    }
                    Err(e) => vec![invalid_pose(e)],
                }
            }
            ClientMessage::CalibrationFinish => {
                let Some(frames) = self.calibrating.take() else {
                    return vec![not_started()];
                };
                let skeleton = self.bundle.bundle.pose.skeleton();
                let result = calibrate_user(&frames, skeleton)
                    .and_then(|user| Ok((compute_retarget(&self.bundle.reference, &user, skeleton)?, user)));
                match result {
                    Ok((transform, user)) => {
                        self.transform = Some(transform);
                        vec![ServerMessage::CalibrationResult(user.summary(skeleton))]
                    }
                    Err(e @ AffordanceError::DegenerateBone { .. }) => {
                        vec![ServerMessage::error("degenerate-calibration", e.to_string())]
                    }
                    Err(e) => vec![ServerMessage::error("calibration-failed", e.to_string())],
                }
            }
        }
    }

    /// Advances playback by `dt` seconds and returns the frame to send.
    pub fn tick(&mut self, dt: f64) -> ServerMessage {
        let (next, out) = tick(&self.state, dt, &self.bundle.context);
        self.state = next;
        let b = &self.bundle.bundle;
        let affordance = match &self.transform {
            Some(t) => retarget_pose(&b.pose.frames()[out.reference_frame], t, b.pose.skeleton()).positions,
            None => b.affordance.frames.frames()[out.affordance_frame]
                .positions
                .clone(),
        };
        ServerMessage::Frame(FrameMessage {
            tick: out,
            mode: self.state.affordance_mode,
            affordance,
            user: self.user_pose.clone(),
        })
    }

    fn frame(&self, p: PoseMessage) -> Result<PoseFrame, MotionError> {
        p.into_frame(self.bundle.bundle.pose.skeleton())
    }
}

fn invalid_pose(e: MotionError) -> ServerMessage {
    ServerMessage::error("invalid-pose", e.to_string())
}

fn not_started() -> ServerMessage {
    ServerMessage::error("calibration-not-started", "send calibration_start first")
}

/// Deviation of measured tick intervals from the nominal period.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct JitterStats {
    pub ticks: u64,
    pub max_s: f64,
    sum_s: f64,
}

impl JitterStats {
    pub fn record(&mut self, dt: f64, period: f64) {
        let j = (dt - period).abs();
        self.ticks += 1;
        self.sum_s += j;
        self.max_s = self.max_s.max(j);
    }

    pub fn mean_s(&self) -> f64 {
        if self.ticks == 0 {
            0.0
        } else {
            self.sum_s / self.ticks as f64
        }
    }
}
