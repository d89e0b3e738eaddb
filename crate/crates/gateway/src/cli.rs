//! The `eightcount` command line.
//!
//! Exit codes: 0 success, 1 runtime failure or an invalid bundle, 2 bad input
//! (usage errors, failed generation checks, missing paths).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eightcount_core::affordance::{default_emphasized_joints, AffordanceMode, CalibrationSummary};
use eightcount_core::audio::{read_wav_file, write_wav_file, WavEncoding};
use eightcount_core::bundle::{
    assemble_bundle, load_bundle, validate_bundle, write_bundle, AssembleOptions, BundleError, BundleRequest,
    LearningBundle, WriteOptions, DEFAULT_FPS, DEFAULT_TARGET_RMS, MANIFEST_FILE,
};
use eightcount_core::motion::{parse_pose_sequence, serialize_pose_sequence, Skeleton};
use eightcount_core::synth::{sine_song, synthetic_dance};
use sha2::{Digest, Sha256};

use crate::config::{ClockMode, ServerConfig};
use crate::replay::{run_replay, ReplayOptions, ReplaySource};

#[derive(Debug, Parser)]
#[command(
    name = "eightcount",
    version,
    about = "Build and serve 8-count dance practice bundles"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a bundle from a song clip and a reference pose sequence.
    Generate(GenerateArgs),
    /// Print a bundle's manifest, segment table and asset checksums.
    Inspect { path: PathBuf },
    /// Check a bundle against every format invariant.
    Validate { path: PathBuf },
    /// Serve bundles over HTTP and live sessions over WebSocket.
    Serve(ServeArgs),
    /// Stream a pose file into a live session as the learner.
    Replay(ReplayArgs),
    /// Write a synthetic song and matching dance for trying things out.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub audio: PathBuf,
    #[arg(long)]
    pub pose: PathBuf,
    #[arg(long)]
    pub bpm: f64,
    /// Clip start in the song, seconds.
    #[arg(long)]
    pub start: f64,
    /// Clip end in the song, seconds.
    #[arg(long)]
    pub end: f64,
    /// First beat, seconds after --start.
    #[arg(long, default_value_t = 0.0)]
    pub offset: f64,
    /// Defaults to the audio file name.
    #[arg(long)]
    pub title: Option<String>,
    #[arg(long, default_value = "bundle")]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FPS)]
    pub fps: f64,
    #[arg(long, default_value_t = DEFAULT_TARGET_RMS)]
    pub target_rms: f64,
    /// joints_only, joints_plus_translucent_body, full_body or invisible.
    #[arg(long, default_value = "joints_only", value_parser = parse_mode)]
    pub mode: AffordanceMode,
    /// Comma-separated joint names to emphasize.
    #[arg(long, value_delimiter = ',')]
    pub emphasize: Option<Vec<String>>,
    /// Learner calibration (JSON, as returned by a session) to retarget to.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Write 16-bit PCM instead of 32-bit float WAV.
    #[arg(long)]
    pub pcm16: bool,
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// TOML config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Bundle root; also read from EIGHTCOUNT_BUNDLE_ROOT.
    #[arg(long)]
    pub bundles: Option<PathBuf>,
    #[arg(long)]
    pub host: Option<std::net::IpAddr>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub fps: Option<f64>,
    /// Advance sessions by exactly 1/fps per tick instead of measured time.
    #[arg(long)]
    pub fixed_clock: bool,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// e.g. ws://127.0.0.1:8080/session/demo
    #[arg(long)]
    pub url: String,
    #[arg(long)]
    pub pose: PathBuf,
    #[arg(long, default_value_t = eightcount_core::affordance::DEFAULT_CALIBRATION_FRAMES)]
    pub calibration_frames: usize,
    #[arg(long)]
    pub no_calibrate: bool,
    /// Stop after this many frames instead of at the end of the pose file.
    #[arg(long)]
    pub ticks: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8.0)]
    pub seconds: f64,
    #[arg(long, default_value_t = 120.0)]
    pub bpm: f64,
    #[arg(long, default_value_t = DEFAULT_FPS)]
    pub fps: f64,
    /// Body scale of the synthetic dancer.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

fn parse_mode(s: &str) -> Result<AffordanceMode, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned()))
        .map_err(|_| "expected joints_only, joints_plus_translucent_body, full_body or invisible".to_owned())
}

pub fn main() -> ExitCode {
    run(Cli::parse())
}

pub fn run(cli: Cli) -> ExitCode {
    match cli.command {
        Command::Generate(args) => generate(args),
        Command::Inspect { path } => inspect(&path),
        Command::Validate { path } => validate(&path),
        Command::Serve(args) => serve(args),
        Command::Replay(args) => replay(args),
        Command::Synth(args) => synth(args),
    }
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn generate(args: GenerateArgs) -> ExitCode {
    match build(&args) {
        Ok(bundle) => {
            let options = WriteOptions {
                overwrite: args.overwrite,
                encoding: if args.pcm16 {
                    WavEncoding::Pcm16
                } else {
                    WavEncoding::Float32
                },
            };
            match write_bundle(&bundle, &args.out, options) {
                Ok(()) => {
                    print_summary(&bundle, &args.out);
                    ExitCode::SUCCESS
                }
                Err(e @ BundleError::DestinationNotEmpty(_)) => fail(2, e),
                Err(e) => fail(1, e),
            }
        }
        Err(msg) => fail(2, msg),
    }
}

fn build(args: &GenerateArgs) -> Result<LearningBundle, String> {
    let skeleton = Skeleton::canonical();
    let song = read_wav_file(&args.audio).map_err(|e| format!("{}: {e}", args.audio.display()))?;
    if song.clipped > 0 {
        eprintln!("warning: {} input samples clipped to [-1, 1]", song.clipped);
    }
    let data = std::fs::read(&args.pose).map_err(|e| format!("{}: {e}", args.pose.display()))?;
    let pose = parse_pose_sequence(&data, &skeleton).map_err(|e| format!("{}: {e}", args.pose.display()))?;
    let calibration = match &args.calibration {
        Some(path) => {
            let text = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let summary: CalibrationSummary =
                serde_json::from_slice(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            Some(summary.to_calibration(&skeleton).map_err(|e| e.to_string())?)
        }
        None => None,
    };
    let title = args.title.clone().unwrap_or_else(|| {
        args.audio
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "untitled".into())
    });
    let request = BundleRequest {
        title,
        bpm: args.bpm,
        offset_s: args.offset,
        start_s: args.start,
        end_s: args.end,
    };
    let options = AssembleOptions {
        fps: args.fps,
        target_rms: args.target_rms,
        affordance_mode: args.mode,
        emphasized_joints: args.emphasize.clone().unwrap_or_else(default_emphasized_joints),
        ..AssembleOptions::default()
    };
    assemble_bundle(&song.track, &pose, &request, calibration.as_ref(), &options).map_err(|e| e.to_string())
}

fn print_summary(bundle: &LearningBundle, out: &Path) {
    let m = &bundle.manifest;
    let partial = m.segments.iter().filter(|s| s.partial).count();
    println!("wrote {}", out.display());
    println!("title     {}", m.title);
    println!(
        "duration  {:.3} s at {} bpm, first beat {:.3} s",
        m.duration_s, m.bpm, m.offset_s
    );
    println!(
        "segments  {} ({} full, {} partial)",
        m.segments.len(),
        m.segments.len() - partial,
        partial
    );
    println!(
        "clipped   music {}, beat {}, mixed {}",
        m.clipping.music, m.clipping.beat, m.clipping.mixed
    );
}

fn inspect(path: &Path) -> ExitCode {
    if !path.exists() {
        return fail(2, format!("{} does not exist", path.display()));
    }
    let bundle = match load_bundle(path) {
        Ok(b) => b,
        Err(e) => return fail(1, e),
    };
    let m = &bundle.manifest;
    print!("{}", m.to_canonical_json());
    println!();
    println!(
        "{:>3}  {:>9}  {:>9}  {:>5}  kind",
        "#", "start_s", "end_s", "beats"
    );
    for s in &m.segments {
        println!(
            "{:>3}  {:>9.3}  {:>9.3}  {:>5}  {}",
            s.index,
            s.start_s,
            s.end_s,
            s.beat_indices.len(),
            if s.partial { "partial" } else { "full" }
        );
    }
    println!();
    let mut files = vec![("manifest", MANIFEST_FILE)];
    files.extend(m.assets.entries());
    for (name, rel) in files {
        match std::fs::read(path.join(rel)) {
            Ok(bytes) => println!("{}  {name:<10} {rel}", hex::encode(Sha256::digest(&bytes))),
            Err(e) => return fail(1, format!("{rel}: {e}")),
        }
    }
    let violations = validate_bundle(&bundle);
    if violations.is_empty() {
        println!("\nvalid");
    } else {
        println!("\n{} violation(s):", violations.len());
        for v in &violations {
            println!("  {v}");
        }
    }
    ExitCode::SUCCESS
}

fn validate(path: &Path) -> ExitCode {
    if !path.exists() {
        return fail(2, format!("{} does not exist", path.display()));
    }
    let bundle = match load_bundle(path) {
        Ok(b) => b,
        Err(e) => return fail(1, e),
    };
    let violations = validate_bundle(&bundle);
    if violations.is_empty() {
        println!("ok: {}", path.display());
        ExitCode::SUCCESS
    } else {
        for v in &violations {
            println!("{v}");
        }
        fail(
            1,
            format!("{} violation(s) in {}", violations.len(), path.display()),
        )
    }
}

fn runtime() -> std::io::Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build()
}

fn serve(args: ServeArgs) -> ExitCode {
    let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).try_init();
    let base = match &args.config {
        Some(path) => match ServerConfig::from_file(path) {
            Ok(c) => c,
            Err(e) => return fail(2, e),
        },
        None => ServerConfig::default(),
    };
    let mut config = base.with_env();
    if let Some(root) = args.bundles {
        config.bundle_root = root;
    }
    if let Some(host) = args.host {
        config.host = host;
    }
    if let Some(port) = args.port {
        config.port = port;
    }
    if let Some(fps) = args.fps {
        config.fps = fps;
    }
    if args.fixed_clock {
        config.clock = ClockMode::Fixed;
    }
    if let Err(e) = config.validate() {
        return fail(2, e);
    }
    let rt = match runtime() {
        Ok(rt) => rt,
        Err(e) => return fail(1, e),
    };
    match rt.block_on(crate::server::serve(config)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(1, e),
    }
}

fn replay(args: ReplayArgs) -> ExitCode {
    let source = match std::fs::read(&args.pose)
        .map_err(|e| e.to_string())
        .and_then(|d| parse_pose_sequence(&d, &Skeleton::canonical()).map_err(|e| e.to_string()))
    {
        Ok(seq) => ReplaySource::new(seq, args.calibration_frames),
        Err(e) => return fail(2, format!("{}: {e}", args.pose.display())),
    };
    let options = ReplayOptions {
        calibrate: !args.no_calibrate,
        ticks: args.ticks,
        realtime: true,
    };
    let rt = match runtime() {
        Ok(rt) => rt,
        Err(e) => return fail(1, e),
    };
    match rt.block_on(run_replay(&args.url, &source, &options)) {
        Ok(report) => {
            if let Some(c) = &report.calibration {
                println!(
                    "calibrated on {} frames, {} bones",
                    c.frames_used,
                    c.bone_lengths.len()
                );
            }
            println!("frames received {}", report.frames_received);
            if let Some(s) = &report.final_state {
                println!(
                    "stopped at {:.3} s, segment {}, count {}",
                    s.state.position_s, s.current_segment, s.count
                );
            }
            for (code, detail) in &report.errors {
                println!("server error {code}: {detail}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(1, e),
    }
}

fn synth(args: SynthArgs) -> ExitCode {
    if !(args.seconds > 0.0 && args.fps > 0.0 && args.bpm > 0.0 && args.scale > 0.0) {
        return fail(2, "seconds, fps, bpm and scale must be positive");
    }
    let song = sine_song(
        args.seconds,
        330.0,
        0.5,
        eightcount_core::audio::DEFAULT_SAMPLE_RATE,
    );
    let frames = (args.seconds * args.fps).round() as usize;
    let dance = synthetic_dance(frames, args.fps, args.bpm, args.scale);
    let result = std::fs::create_dir_all(&args.out)
        .map_err(|e| e.to_string())
        .and_then(|()| {
            write_wav_file(&song, args.out.join("song.wav"), WavEncoding::Float32).map_err(|e| e.to_string())
        })
        .and_then(|()| {
            std::fs::write(args.out.join("pose.json"), serialize_pose_sequence(&dance))
                .map_err(|e| e.to_string())
        });
    match result {
        Ok(()) => {
            println!(
                "wrote {}/song.wav and {}/pose.json",
                args.out.display(),
                args.out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(1, e),
    }
}
