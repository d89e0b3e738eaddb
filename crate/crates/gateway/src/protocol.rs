//! Wire messages for `/session/{bundle-id}`.
//!
//! Every message is one JSON text frame with a `type` tag. The schema lives in
//! `docs/protocol.schema.json`; the round-trip tests keep the two in sync.

use eightcount_core::affordance::{AffordanceMode, CalibrationSummary};
use eightcount_core::motion::{MotionError, PoseFrame, Skeleton};
use eightcount_core::session::{SessionCommand, SessionSnapshot, TickOutput};
use eightcount_core::Vec3;
use serde::{Deserialize, Serialize};

/// A pose frame as it travels on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseMessage {
    pub t: f64,
    pub positions: Vec<Vec3>,
}

impl PoseMessage {
    /// Checks joint count and finiteness before the frame reaches the session.
    pub fn into_frame(self, skeleton: &Skeleton) -> Result<PoseFrame, MotionError> {
        let frame = PoseFrame::new(self.t, self.positions);
        frame.validate(skeleton, 0)?;
        Ok(frame)
    }
}

impl From<&PoseFrame> for PoseMessage {
    fn from(f: &PoseFrame) -> Self {
        Self {
            t: f.t,
            positions: f.positions.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    /// `{"type":"command","command":"set_rate","value":0.5}`
    Command(SessionCommand),
    UserPoseFrame(PoseMessage),
    CalibrationStart,
    CalibrationFrame(PoseMessage),
    CalibrationFinish,
}

/// One tick of playback plus the affordance skeleton to draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMessage {
    #[serde(flatten)]
    pub tick: TickOutput,
    pub mode: AffordanceMode,
    /// Full 24-joint affordance skeleton, retargeted to the learner once calibrated.
    pub affordance: Vec<Vec3>,
    /// Latest smoothed learner pose, if one has arrived.
    pub user: Option<Vec<Vec3>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    StateUpdate(SessionSnapshot),
    Frame(FrameMessage),
    CalibrationResult(CalibrationSummary),
    Error { code: String, detail: String },
}

impl ServerMessage {
    pub fn error(code: impl Into<String>, detail: impl Into<String>) -> Self {
        ServerMessage::Error {
            code: code.into(),
            detail: detail.into(),
        }
    }

    /// Frames may be dropped under backpressure; everything else is delivered.
    pub fn droppable(&self) -> bool {
        matches!(self, ServerMessage::Frame(_))
    }
}

pub fn encode<T: Serialize>(msg: &T) -> String {
    serde_json::to_string(msg).expect("protocol messages always serialize")
}

pub fn decode_client(text: &str) -> Result<ClientMessage, serde_json::Error> {
    serde_json::from_str(text)
}

pub fn decode_server(text: &str) -> Result<ServerMessage, serde_json::Error> {
    serde_json::from_str(text)
}
