use eightcount_core::affordance::AffordanceMode;
use eightcount_core::audio::AllowedRates;
use eightcount_core::session::{apply_command, tick, PlaybackContext, SessionCommand, SessionState};
use eightcount_core::timeline::{build_beat_grid, segment_eight_counts};
use proptest::prelude::*;

fn ctx(bpm: f64, offset: f64, duration: f64) -> PlaybackContext {
    let grid = build_beat_grid(bpm, offset, duration).unwrap();
    let segments = segment_eight_counts(&grid);
    PlaybackContext {
        bundle_id: "fixture".into(),
        grid,
        segments,
        fps: 30.0,
        frame_count: (duration * 30.0).round() as usize,
        allowed_rates: AllowedRates::default(),
        default_mode: AffordanceMode::JointsOnly,
    }
}

#[derive(Debug, Clone)]
enum Step {
    Cmd(SessionCommand),
    Tick(f64),
}

fn command() -> impl Strategy<Value = SessionCommand> {
    prop_oneof![
        Just(SessionCommand::Play),
        Just(SessionCommand::Pause),
        prop::sample::select(vec![0.5, 0.75, 1.0, 2.0]).prop_map(SessionCommand::SetRate),
        Just(SessionCommand::ToggleRepeat),
        Just(SessionCommand::ToggleMusic),
        Just(SessionCommand::ToggleBeat),
        (0usize..4).prop_map(SessionCommand::SeekSegment),
        Just(SessionCommand::NextSegment),
        Just(SessionCommand::PrevSegment),
        (-1.0f64..10.0).prop_map(SessionCommand::SeekTime),
        prop::sample::select(AffordanceMode::ALL.to_vec()).prop_map(SessionCommand::SetAffordanceMode),
    ]
}

fn step() -> impl Strategy<Value = Step> {
    prop_oneof![
        1 => command().prop_map(Step::Cmd),
        3 => (0.0f64..0.4).prop_map(Step::Tick),
    ]
}

fn run(c: &PlaybackContext, script: &[Step]) -> Vec<SessionState> {
    let mut s = SessionState::new(c);
    let mut trace = vec![s.clone()];
    for st in script {
        s = match st {
            Step::Cmd(cmd) => apply_command(&s, cmd, c).unwrap_or(s),
            Step::Tick(dt) => tick(&s, *dt, c).0,
        };
        trace.push(s.clone());
    }
    trace
}

proptest! {
    #[test]
    fn replay_is_bit_identical(script in prop::collection::vec(step(), 0..300)) {
        let c = ctx(120.0, 0.3, 9.0);
        let a = run(&c, &script);
        let b = run(&c, &script);
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.position_s.to_bits(), y.position_s.to_bits());
            prop_assert_eq!(x, y);
        }
    }

    #[test]
    fn position_stays_in_bounds(script in prop::collection::vec(step(), 0..300)) {
        let c = ctx(100.0, 0.3, 9.0);
        for s in run(&c, &script) {
            prop_assert!(s.position_s >= 0.0 && s.position_s <= c.duration());
            if let Some(i) = s.selected_segment {
                prop_assert!(i < c.segments.len());
            }
            prop_assert!(c.allowed_rates.contains(s.rate));
        }
    }

    #[test]
    fn repeat_with_selection_stays_in_segment(script in prop::collection::vec(step(), 0..300)) {
        let c = ctx(120.0, 0.3, 9.0);
        let mut s = SessionState::new(&c);
        for st in &script {
            match st {
                Step::Cmd(cmd) => s = apply_command(&s, cmd, &c).unwrap_or(s),
                Step::Tick(dt) => {
                    s = tick(&s, *dt, &c).0;
                    if let (true, Some(i)) = (s.repeat, s.selected_segment) {
                        let seg = &c.segments[i];
                        prop_assert!(seg.start_s <= s.position_s && s.position_s < seg.end_s,
                            "{} outside [{}, {})", s.position_s, seg.start_s, seg.end_s);
                    }
                }
            }
        }
    }

    #[test]
    fn commands_only_move_position_when_seeking(cmd in command(), t in 0.0f64..9.0) {
        let c = ctx(120.0, 0.0, 9.0);
        let mut s = SessionState::new(&c);
        s.position_s = t;
        if let Ok(next) = apply_command(&s, &cmd, &c) {
            let seeks = matches!(
                cmd,
                SessionCommand::SeekSegment(_) | SessionCommand::NextSegment
                    | SessionCommand::PrevSegment | SessionCommand::SeekTime(_)
            );
            if !seeks {
                prop_assert_eq!(next.position_s, t);
            }
        }
    }

    #[test]
    fn ticks_never_touch_controls(script in prop::collection::vec(step(), 0..100), dt in 0.0f64..2.0) {
        let c = ctx(120.0, 0.0, 8.0);
        let s = run(&c, &script).pop().unwrap();
        let (n, out) = tick(&s, dt, &c);
        prop_assert_eq!(
            (n.rate, n.repeat, n.music_on, n.beat_on, n.affordance_mode),
            (s.rate, s.repeat, s.music_on, s.beat_on, s.affordance_mode)
        );
        prop_assert!(out.reference_frame < c.frame_count);
    }

    #[test]
    fn playback_without_repeat_is_monotone(dts in prop::collection::vec(0.0f64..0.5, 1..200), seg in 0usize..3) {
        let c = ctx(120.0, 0.2, 9.0);
        let mut s = SessionState::new(&c);
        s = apply_command(&s, &SessionCommand::SeekSegment(seg), &c).unwrap();
        s = apply_command(&s, &SessionCommand::Play, &c).unwrap();
        for dt in dts {
            let (n, _) = tick(&s, dt, &c);
            prop_assert!(n.position_s >= s.position_s);
            s = n;
        }
    }
}
