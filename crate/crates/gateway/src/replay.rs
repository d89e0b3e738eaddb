//! Replay pose source: streams a recorded pose-JSON to a session as if it were
//! a live learner, calibrating on its first frames.

use std::path::Path;
use std::time::Duration;

use eightcount_core::affordance::{CalibrationSummary, DEFAULT_CALIBRATION_FRAMES};
use eightcount_core::motion::{parse_pose_sequence, PoseSequence, Skeleton};
use eightcount_core::session::{SessionCommand, SessionSnapshot};

use crate::client::SessionClient;
use crate::error::GatewayError;
use crate::protocol::{ClientMessage, FrameMessage, PoseMessage, ServerMessage};

const REPLY_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone)]
pub struct ReplaySource {
    seq: PoseSequence,
    calibration_frames: usize,
}

impl ReplaySource {
    pub fn new(seq: PoseSequence, calibration_frames: usize) -> Self {
        Self {
            seq,
            calibration_frames,
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let data = std::fs::read(path)?;
        let seq = parse_pose_sequence(&data, &Skeleton::canonical())?;
        Ok(Self::new(seq, DEFAULT_CALIBRATION_FRAMES))
    }

    pub fn fps(&self) -> f64 {
        self.seq.fps()
    }

    /// `calibration_start`, the first frames, `calibration_finish`.
    pub fn calibration_messages(&self) -> Vec<ClientMessage> {
        let n = self.calibration_frames.clamp(1, self.seq.len());
        std::iter::once(ClientMessage::CalibrationStart)
            .chain(
                self.seq.frames()[..n]
                    .iter()
                    .map(|f| ClientMessage::CalibrationFrame(PoseMessage::from(f))),
            )
            .chain(std::iter::once(ClientMessage::CalibrationFinish))
            .collect()
    }

    pub fn pose_messages(&self) -> impl Iterator<Item = ClientMessage> + '_ {
        self.seq
            .frames()
            .iter()
            .map(|f| ClientMessage::UserPoseFrame(PoseMessage::from(f)))
    }
}

#[derive(Debug, Clone)]
pub struct ReplayOptions {
    pub calibrate: bool,
    /// Stop after this many frames have arrived since playback started;
    /// otherwise run until the pose file is exhausted.
    pub ticks: Option<usize>,
    /// Pace user frames at the file's fps instead of sending them as fast as possible.
    pub realtime: bool,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        Self {
            calibrate: true,
            ticks: None,
            realtime: true,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReplayReport {
    pub calibration: Option<CalibrationSummary>,
    pub frames_received: usize,
    /// Last frame received before pausing.
    pub last_frame: Option<FrameMessage>,
    /// State after the closing `pause`.
    pub final_state: Option<SessionSnapshot>,
    pub errors: Vec<(String, String)>,
}

/// Connects, optionally calibrates, plays while streaming the poses, then pauses.
pub async fn run_replay(
    url: &str,
    source: &ReplaySource,
    options: &ReplayOptions,
) -> Result<ReplayReport, GatewayError> {
    let mut client = SessionClient::connect(url).await?;
    let mut report = ReplayReport::default();

    match client.recv().await? {
        Some(ServerMessage::StateUpdate(_)) => {}
        Some(ServerMessage::Error { code, detail }) => return Err(GatewayError::Remote { code, detail }),
        other => {
            return Err(GatewayError::Protocol(format!(
                "expected state_update, got {other:?}"
            )))
        }
    }

    if options.calibrate {
        for m in source.calibration_messages() {
            client.send(&m).await?;
        }
        let reply = client
            .recv_until(
                REPLY_TIMEOUT,
                |m| {
                    matches!(
                        m,
                        ServerMessage::CalibrationResult(_) | ServerMessage::Error { .. }
                    )
                },
                |_| {},
            )
            .await?;
        match reply {
            ServerMessage::CalibrationResult(s) => report.calibration = Some(s),
            ServerMessage::Error { code, detail } => return Err(GatewayError::Remote { code, detail }),
            _ => unreachable!(),
        }
    }

    client.send(&ClientMessage::Command(SessionCommand::Play)).await?;
    client
        .recv_until(
            REPLY_TIMEOUT,
            |m| matches!(m, ServerMessage::StateUpdate(s) if s.state.playing),
            |_| {},
        )
        .await?;

    let mut poses = source.pose_messages();
    let mut pace = tokio::time::interval(Duration::from_secs_f64(1.0 / source.fps()));
    let mut poses_done = false;
    loop {
        if let Some(n) = options.ticks {
            if report.frames_received >= n {
                break;
            }
        } else if poses_done {
            break;
        }
        tokio::select! {
            _ = pace.tick(), if !poses_done && options.realtime => match poses.next() {
                Some(m) => client.send(&m).await?,
                None => poses_done = true,
            },
            msg = client.recv() => match msg? {
                Some(ServerMessage::Frame(f)) => {
                    report.frames_received += 1;
                    report.last_frame = Some(f);
                }
                Some(ServerMessage::Error { code, detail }) => report.errors.push((code, detail)),
                Some(_) => {}
                None => return Err(GatewayError::Protocol("server closed the stream".into())),
            },
        }
        if !options.realtime && !poses_done {
            for m in poses.by_ref() {
                client.send(&m).await?;
            }
            poses_done = true;
        }
    }

    client
        .send(&ClientMessage::Command(SessionCommand::Pause))
        .await?;
    let paused = client
        .recv_until(
            REPLY_TIMEOUT,
            |m| matches!(m, ServerMessage::StateUpdate(s) if !s.state.playing),
            |_| {},
        )
        .await?;
    if let ServerMessage::StateUpdate(s) = paused {
        report.final_state = Some(s);
    }
    client.close().await?;
    Ok(report)
}
