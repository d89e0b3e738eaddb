#![allow(dead_code)]

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::time::Duration;

use eightcount_core::affordance::{AffordanceMode, CalibrationSummary};
use eightcount_core::bundle::{assemble_bundle, AssembleOptions, BundleRequest, LearningBundle};
use eightcount_core::session::{
    apply_command, AudioSource, PlaybackContext, SegmentSummary, SessionCommand, SessionSnapshot,
    SessionState, TickOutput, TimelineSummary,
};
use eightcount_core::synth::{sine_song, synthetic_dance};
use eightcount_core::{AllowedRates, Vec3};
use eightcount_gateway::client::SessionClient;
use eightcount_gateway::protocol::{ClientMessage, FrameMessage, PoseMessage, ServerMessage};
use eightcount_gateway::server::{serve_on, AppState};
use eightcount_gateway::store::{BundleStore, StoredBundle};
use eightcount_gateway::ServerConfig;
use proptest::prelude::*;

/// 8 s sine at 120 bpm with a 240-frame synthetic dance.
pub fn fixture_bundle() -> LearningBundle {
    let song = sine_song(8.0, 330.0, 0.5, 48_000);
    let pose = synthetic_dance(240, 30.0, 120.0, 1.0);
    let request = BundleRequest {
        title: "fixture".into(),
        bpm: 120.0,
        offset_s: 0.0,
        start_s: 0.0,
        end_s: 8.0,
    };
    assemble_bundle(&song, &pose, &request, None, &AssembleOptions::default()).unwrap()
}

pub fn store() -> BundleStore {
    let mut store = BundleStore::new();
    store.insert(StoredBundle::new("demo", fixture_bundle(), AllowedRates::default()).unwrap());
    store
}

pub async fn spawn_server(config: ServerConfig) -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(serve_on(listener, AppState::new(store(), config)));
    addr
}

pub fn session_url(addr: SocketAddr, id: &str) -> String {
    format!("ws://{addr}/session/{id}")
}

fn num() -> impl Strategy<Value = f64> {
    use prop::num::f64::{NEGATIVE, NORMAL, POSITIVE, SUBNORMAL, ZERO};
    POSITIVE | NEGATIVE | NORMAL | SUBNORMAL | ZERO
}

pub fn vec3() -> impl Strategy<Value = Vec3> {
    (num(), num(), num()).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn pose() -> impl Strategy<Value = PoseMessage> {
    (num(), prop::collection::vec(vec3(), 24)).prop_map(|(t, positions)| PoseMessage { t, positions })
}

fn mode() -> impl Strategy<Value = AffordanceMode> {
    prop::sample::select(AffordanceMode::ALL.to_vec())
}

fn audio_source() -> impl Strategy<Value = AudioSource> {
    prop::sample::select(vec![
        AudioSource::Mixed,
        AudioSource::Music,
        AudioSource::Beat,
        AudioSource::Silent,
    ])
}

pub fn command() -> impl Strategy<Value = SessionCommand> {
    prop_oneof![
        Just(SessionCommand::Play),
        Just(SessionCommand::Pause),
        num().prop_map(SessionCommand::SetRate),
        Just(SessionCommand::ToggleRepeat),
        Just(SessionCommand::ToggleMusic),
        Just(SessionCommand::ToggleBeat),
        any::<usize>().prop_map(SessionCommand::SeekSegment),
        Just(SessionCommand::NextSegment),
        Just(SessionCommand::PrevSegment),
        num().prop_map(SessionCommand::SeekTime),
        mode().prop_map(SessionCommand::SetAffordanceMode),
    ]
}

pub fn client_message() -> impl Strategy<Value = ClientMessage> {
    prop_oneof![
        command().prop_map(ClientMessage::Command),
        pose().prop_map(ClientMessage::UserPoseFrame),
        Just(ClientMessage::CalibrationStart),
        pose().prop_map(ClientMessage::CalibrationFrame),
        Just(ClientMessage::CalibrationFinish),
    ]
}

fn state() -> impl Strategy<Value = SessionState> {
    (
        ".{0,12}",
        num(),
        any::<[bool; 4]>(),
        num(),
        any::<Option<usize>>(),
        mode(),
    )
        .prop_map(
            |(bundle_id, position_s, b, rate, selected_segment, affordance_mode)| SessionState {
                bundle_id,
                position_s,
                playing: b[0],
                rate,
                repeat: b[1],
                music_on: b[2],
                beat_on: b[3],
                selected_segment,
                affordance_mode,
            },
        )
}

fn snapshot() -> impl Strategy<Value = SessionSnapshot> {
    let segment =
        (any::<usize>(), num(), num(), any::<bool>()).prop_map(|(index, start_s, end_s, partial)| {
            SegmentSummary {
                index,
                start_s,
                end_s,
                partial,
            }
        });
    let timeline = (num(), num(), num(), prop::collection::vec(segment, 0..6)).prop_map(
        |(duration_s, bpm, offset_s, segments)| TimelineSummary {
            duration_s,
            bpm,
            offset_s,
            segments,
        },
    );
    (
        state(),
        any::<usize>(),
        any::<u8>(),
        num(),
        audio_source(),
        prop::collection::vec(num(), 0..4),
        timeline,
    )
        .prop_map(
            |(state, current_segment, count, phase, audio_source, allowed_rates, timeline)| SessionSnapshot {
                state,
                current_segment,
                count,
                phase,
                audio_source,
                allowed_rates,
                timeline,
            },
        )
}

fn frame() -> impl Strategy<Value = FrameMessage> {
    let tick = (
        num(),
        any::<[usize; 3]>(),
        any::<u8>(),
        num(),
        any::<bool>(),
        audio_source(),
    )
        .prop_map(
            |(position_s, idx, count, phase, wrapped, audio_source)| TickOutput {
                position_s,
                reference_frame: idx[0],
                affordance_frame: idx[1],
                segment: idx[2],
                count,
                phase,
                wrapped,
                audio_source,
            },
        );
    (
        tick,
        mode(),
        prop::collection::vec(vec3(), 24),
        prop::option::of(prop::collection::vec(vec3(), 24)),
    )
        .prop_map(|(tick, mode, affordance, user)| FrameMessage {
            tick,
            mode,
            affordance,
            user,
        })
}

fn calibration() -> impl Strategy<Value = CalibrationSummary> {
    (
        prop::collection::btree_map("[a-z_]{1,12}->[a-z_]{1,12}", num(), 0..24),
        vec3(),
        any::<usize>(),
    )
        .prop_map(
            |(bone_lengths, root_reference, frames_used): (BTreeMap<_, _>, _, _)| CalibrationSummary {
                bone_lengths,
                root_reference,
                frames_used,
            },
        )
}

pub fn server_message() -> impl Strategy<Value = ServerMessage> {
    prop_oneof![
        snapshot().prop_map(ServerMessage::StateUpdate),
        frame().prop_map(ServerMessage::Frame),
        calibration().prop_map(ServerMessage::CalibrationResult),
        (".{0,16}", ".{0,40}").prop_map(|(code, detail)| ServerMessage::Error { code, detail }),
    ]
}

/// Commands that never start playback, so positions stay deterministic.
pub fn paused_command() -> impl Strategy<Value = SessionCommand> {
    prop_oneof![
        Just(SessionCommand::Pause),
        prop::sample::select(vec![0.5, 0.75, 1.0, 2.0]).prop_map(SessionCommand::SetRate),
        Just(SessionCommand::ToggleRepeat),
        Just(SessionCommand::ToggleMusic),
        Just(SessionCommand::ToggleBeat),
        (0usize..3).prop_map(SessionCommand::SeekSegment),
        Just(SessionCommand::NextSegment),
        Just(SessionCommand::PrevSegment),
        (-1.0f64..9.0).prop_map(SessionCommand::SeekTime),
        prop::sample::select(eightcount_core::AffordanceMode::ALL.to_vec())
            .prop_map(SessionCommand::SetAffordanceMode),
    ]
}

/// Sends `cmd` and returns the state the server reports afterwards.
async fn send_command(c: &mut SessionClient, cmd: &SessionCommand) -> Option<SessionState> {
    c.send(&ClientMessage::Command(cmd.clone())).await.unwrap();
    let reply = c
        .recv_until(
            Duration::from_secs(5),
            |m| !matches!(m, ServerMessage::Frame(_)),
            |_| {},
        )
        .await
        .unwrap();
    match reply {
        ServerMessage::StateUpdate(s) => Some(s.state),
        ServerMessage::Error { .. } => None,
        other => panic!("{other:?}"),
    }
}

pub async fn check_isolation(a: &[SessionCommand], b: &[SessionCommand]) -> Result<(), String> {
    let addr = spawn_server(ServerConfig::default()).await;
    let ctx = PlaybackContext::from_bundle("demo", &fixture_bundle(), AllowedRates::default()).unwrap();
    let url = session_url(addr, "demo");
    let mut clients = [
        SessionClient::connect(&url).await.unwrap(),
        SessionClient::connect(&url).await.unwrap(),
    ];
    for c in clients.iter_mut() {
        c.recv_until(
            Duration::from_secs(5),
            |m| matches!(m, ServerMessage::StateUpdate(_)),
            |_| {},
        )
        .await
        .unwrap();
    }
    let mut oracle = [SessionState::new(&ctx), SessionState::new(&ctx)];
    let scripts = [a, b];
    for i in 0..a.len().max(b.len()) {
        for who in 0..2 {
            let Some(cmd) = scripts[who].get(i) else { continue };
            let expected = apply_command(&oracle[who], cmd, &ctx).ok();
            let got = send_command(&mut clients[who], cmd).await;
            if got != expected {
                return Err(format!(
                    "client {who} step {i}: got {got:?}, expected {expected:?}"
                ));
            }
            if let Some(s) = expected {
                oracle[who] = s;
            }
        }
    }
    Ok(())
}
