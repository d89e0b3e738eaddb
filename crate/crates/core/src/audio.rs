//! Mono PCM tracks: count-track synthesis, RMS normalization, mixing,
//! trimming, rate-changed rendering and WAV I/O.
//!
//! Every operation hard-clips to `[-1, 1]`; those that can clip report how
//! many samples they clipped.

use std::f64::consts::PI;
use std::io::{Read, Seek, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default output sample rate.
pub const DEFAULT_SAMPLE_RATE: u32 = 48_000;

/// RMS at or below this value counts as silence for normalization.
pub const SILENCE_RMS: f64 = 1e-6;

/// Playback rates offered to learners by default.
pub const DEFAULT_RATES: [f64; 3] = [0.5, 0.75, 1.0];

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("sample rate must be positive")]
    InvalidSampleRate,
    #[error("sample {index} is not finite")]
    NonFiniteSample { index: usize },
    #[error("sample {index} outside [-1, 1]: {value}")]
    SampleOutOfRange { index: usize, value: f32 },
    #[error("invalid count track: {0}")]
    InvalidCountTrack(String),
    #[error("input is silent (rms {rms:e} <= {SILENCE_RMS:e})")]
    SilentInput { rms: f64 },
    #[error("target rms must be positive and finite, got {0}")]
    InvalidTarget(f64),
    #[error("sample rates differ: {a} Hz vs {b} Hz")]
    SampleRateMismatch { a: u32, b: u32 },
    #[error("offset must be non-negative and finite, got {0}")]
    InvalidOffset(f64),
    #[error("trim bounds [{start}, {end}) invalid for a {duration} s track")]
    InvalidTrim { start: f64, end: f64, duration: f64 },
    #[error("playback rate {rate} is not in the allowed set {allowed:?}")]
    RateNotAllowed { rate: f64, allowed: Vec<f64> },
    #[error("unsupported wav format: {0}")]
    UnsupportedWav(String),
    #[error(transparent)]
    Wav(#[from] hound::Error),
}

/// Mono PCM samples in `[-1, 1]` at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioTrack {
    sample_rate: u32,
    samples: Vec<f32>,
}

impl AudioTrack {
    pub fn new(sample_rate: u32, samples: Vec<f32>) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidSampleRate);
        }
        for (index, &s) in samples.iter().enumerate() {
            if !s.is_finite() {
                return Err(AudioError::NonFiniteSample { index });
            }
            if s.abs() > 1.0 {
                return Err(AudioError::SampleOutOfRange { index, value: s });
            }
        }
        Ok(Self { sample_rate, samples })
    }

    /// `len` zero samples.
    pub fn silence(sample_rate: u32, len: usize) -> Result<Self, AudioError> {
        Self::new(sample_rate, vec![0.0; len])
    }

    /// Builds a track from arbitrary values, hard-clipping to `[-1, 1]`.
    /// Non-finite values are rejected.
    pub fn from_clipped(sample_rate: u32, values: Vec<f64>) -> Result<Clipped, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidSampleRate);
        }
        let mut clipped = 0;
        let mut samples = Vec::with_capacity(values.len());
        for (index, v) in values.into_iter().enumerate() {
            if !v.is_finite() {
                return Err(AudioError::NonFiniteSample { index });
            }
            if v.abs() > 1.0 {
                clipped += 1;
            }
            samples.push(v.clamp(-1.0, 1.0) as f32);
        }
        Ok(Clipped {
            track: Self { sample_rate, samples },
            clipped,
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds, `len / sample_rate`.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Zero-pads or truncates to exactly `len` samples.
    pub fn resized(&self, len: usize) -> AudioTrack {
        let mut samples = self.samples.clone();
        samples.resize(len, 0.0);
        AudioTrack {
            sample_rate: self.sample_rate,
            samples,
        }
    }
}

/// A processed track plus the number of samples hard-clipped while producing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Clipped {
    pub track: AudioTrack,
    pub clipped: usize,
}

/// Parameters of a synthesized count (click) track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountTrackSpec {
    pub bpm: f64,
    /// Beats per cycle; beat 1 of each cycle is accented.
    pub cycle_length: u32,
    pub duration_s: f64,
    /// Time of the first click. Clicks sit at `offset_s + k * 60 / bpm`.
    #[serde(default)]
    pub offset_s: f64,
    /// Peak amplitude of a regular click.
    pub level: f64,
    /// Multiplier on `level` for the accented click.
    pub accent_gain: f64,
    pub tone_hz_accent: f64,
    pub tone_hz_regular: f64,
    pub click_length_s: f64,
}

impl CountTrackSpec {
    /// An 8-count track with the default click voice.
    pub fn new(bpm: f64, duration_s: f64) -> Self {
        Self {
            bpm,
            cycle_length: 8,
            duration_s,
            offset_s: 0.0,
            level: 0.5,
            accent_gain: 1.6,
            tone_hz_accent: 880.0,
            tone_hz_regular: 440.0,
            click_length_s: 0.040,
        }
    }

    pub fn beat_interval(&self) -> f64 {
        60.0 / self.bpm
    }

    pub fn validate(&self) -> Result<(), AudioError> {
        let bad = |m: &str| Err(AudioError::InvalidCountTrack(m.to_string()));
        if !(self.bpm.is_finite() && self.bpm > 0.0) {
            return bad("bpm must be positive");
        }
        if self.cycle_length < 1 {
            return bad("cycle length must be at least 1");
        }
        if !(self.duration_s.is_finite() && self.duration_s >= 0.0) {
            return bad("duration must be non-negative");
        }
        if !(self.offset_s.is_finite() && self.offset_s >= 0.0) {
            return bad("offset must be non-negative");
        }
        if !(self.click_length_s > 0.0 && self.click_length_s < self.beat_interval()) {
            return bad("click length must lie in (0, 60 / bpm)");
        }
        if !(self.level.is_finite() && self.level >= 0.0)
            || !(self.accent_gain.is_finite() && self.accent_gain >= 0.0)
        {
            return bad("gains must be non-negative");
        }
        if !(self.tone_hz_accent > 0.0 && self.tone_hz_regular > 0.0) {
            return bad("tone frequencies must be positive");
        }
        Ok(())
    }

    /// Click onset times: `offset + k * 60 / bpm` for every such time below the duration.
    pub fn onsets(&self) -> Vec<f64> {
        let interval = self.beat_interval();
        (0..)
            .map(|k| self.offset_s + k as f64 * interval)
            .take_while(|&t| t < self.duration_s)
            .collect()
    }
}

/// Renders the count track: a cosine burst with linear fade-out at every beat,
/// accented (higher tone, `accent_gain`) on beat 1 of each cycle.
pub fn synthesize_count_track(spec: &CountTrackSpec, sample_rate: u32) -> Result<Clipped, AudioError> {
    if sample_rate == 0 {
        return Err(AudioError::InvalidSampleRate);
    }
    spec.validate()?;
    let rate = sample_rate as f64;
    let len = (spec.duration_s * rate).round() as usize;
    let click_len = ((spec.click_length_s * rate).round() as usize).max(1);
    let mut out = vec![0.0f64; len];
    for (k, t) in spec.onsets().into_iter().enumerate() {
        let accent = (k as u32).is_multiple_of(spec.cycle_length);
        let (freq, amp) = if accent {
            (spec.tone_hz_accent, spec.level * spec.accent_gain)
        } else {
            (spec.tone_hz_regular, spec.level)
        };
        let start = (t * rate).round() as usize;
        // Cosine phase: the onset sample is the burst's peak.
        for n in 0..click_len {
            let Some(slot) = out.get_mut(start + n) else {
                break;
            };
            let env = 1.0 - n as f64 / click_len as f64;
            *slot += amp * env * (2.0 * PI * freq * n as f64 / rate).cos();
        }
    }
    AudioTrack::from_clipped(sample_rate, out)
}

/// Root-mean-square amplitude; 0 for an empty track.
pub fn measure_rms(track: &AudioTrack) -> f64 {
    if track.samples.is_empty() {
        return 0.0;
    }
    let sum: f64 = track.samples.iter().map(|&s| (s as f64) * (s as f64)).sum();
    (sum / track.samples.len() as f64).sqrt()
}

/// Scales the track so its RMS equals `target_rms`, then hard-clips.
pub fn normalize_rms(track: &AudioTrack, target_rms: f64) -> Result<Clipped, AudioError> {
    if !(target_rms.is_finite() && target_rms > 0.0) {
        return Err(AudioError::InvalidTarget(target_rms));
    }
    let rms = measure_rms(track);
    if rms <= SILENCE_RMS {
        return Err(AudioError::SilentInput { rms });
    }
    let gain = target_rms / rms;
    AudioTrack::from_clipped(
        track.sample_rate,
        track.samples.iter().map(|&s| s as f64 * gain).collect(),
    )
}

/// Sums `gain_a * a` and `gain_b * b` delayed by `b_offset_s`, zero-padding
/// whichever is shorter.
pub fn mix(
    a: &AudioTrack,
    b: &AudioTrack,
    b_offset_s: f64,
    gain_a: f64,
    gain_b: f64,
) -> Result<Clipped, AudioError> {
    if a.sample_rate != b.sample_rate {
        return Err(AudioError::SampleRateMismatch {
            a: a.sample_rate,
            b: b.sample_rate,
        });
    }
    if !(b_offset_s.is_finite() && b_offset_s >= 0.0) {
        return Err(AudioError::InvalidOffset(b_offset_s));
    }
    let offset = (b_offset_s * a.sample_rate as f64).round() as usize;
    let len = a.len().max(offset + b.len());
    let mut out = vec![0.0f64; len];
    for (o, &s) in out.iter_mut().zip(&a.samples) {
        *o += gain_a * s as f64;
    }
    for (o, &s) in out[offset..].iter_mut().zip(&b.samples) {
        *o += gain_b * s as f64;
    }
    AudioTrack::from_clipped(a.sample_rate, out)
}

/// Samples in `[round(start * rate), round(end * rate))`.
pub fn trim(track: &AudioTrack, start_s: f64, end_s: f64) -> Result<AudioTrack, AudioError> {
    let duration = track.duration();
    if !(start_s.is_finite() && end_s.is_finite() && 0.0 <= start_s && start_s < end_s && end_s <= duration) {
        return Err(AudioError::InvalidTrim {
            start: start_s,
            end: end_s,
            duration,
        });
    }
    let rate = track.sample_rate as f64;
    let a = ((start_s * rate).round() as usize).min(track.len());
    let b = ((end_s * rate).round() as usize).min(track.len());
    Ok(AudioTrack {
        sample_rate: track.sample_rate,
        samples: track.samples[a..b].to_vec(),
    })
}

/// The set of playback rates a session may use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AllowedRates(Vec<f64>);

impl AllowedRates {
    pub fn new(rates: Vec<f64>) -> Result<Self, AudioError> {
        if rates.is_empty() {
            return Err(AudioError::RateNotAllowed {
                rate: f64::NAN,
                allowed: rates,
            });
        }
        if let Some(&r) = rates.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(AudioError::RateNotAllowed {
                rate: r,
                allowed: rates,
            });
        }
        Ok(Self(rates))
    }

    pub fn contains(&self, rate: f64) -> bool {
        self.0.contains(&rate)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn check(&self, rate: f64) -> Result<(), AudioError> {
        if rate > 0.0 && self.contains(rate) {
            Ok(())
        } else {
            Err(AudioError::RateNotAllowed {
                rate,
                allowed: self.0.clone(),
            })
        }
    }
}

impl Default for AllowedRates {
    fn default() -> Self {
        Self(DEFAULT_RATES.to_vec())
    }
}

/// Plays the track at `rate` by linear-interpolation resampling: output sample
/// `j` is the input evaluated at position `j * rate`. Pitch shifts with rate.
pub fn render_at_rate(
    track: &AudioTrack,
    rate: f64,
    allowed: &AllowedRates,
) -> Result<AudioTrack, AudioError> {
    allowed.check(rate)?;
    if rate == 1.0 || track.is_empty() {
        return Ok(track.clone());
    }
    let last = track.len() - 1;
    // Nearest whole sample to len / rate; the tail past the last input sample holds it.
    let out_len = (track.len() as f64 / rate).round() as usize;
    let samples = (0..out_len)
        .map(|j| {
            let pos = j as f64 * rate;
            let i = (pos.floor() as usize).min(last);
            let frac = pos - i as f64;
            if frac == 0.0 || i == last {
                track.samples[i]
            } else {
                let (x0, x1) = (track.samples[i] as f64, track.samples[i + 1] as f64);
                (x0 + (x1 - x0) * frac) as f32
            }
        })
        .collect();
    Ok(AudioTrack {
        sample_rate: track.sample_rate,
        samples,
    })
}

/// Sample encoding for written WAV files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WavEncoding {
    #[default]
    Float32,
    Pcm16,
}

/// Reads a WAV stream (16/24/32-bit PCM or 32-bit float, any channel count),
/// averaging channels down to mono. Out-of-range float samples are clipped.
pub fn read_wav<R: Read>(reader: R) -> Result<Clipped, AudioError> {
    let mut wav = hound::WavReader::new(reader)?;
    let spec = wav.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(AudioError::UnsupportedWav("zero channels".into()));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => wav
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<Result<_, _>>()?,
        (hound::SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = (1u64 << (bits - 1)) as f64;
            wav.samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<Result<_, _>>()?
        }
        (fmt, bits) => {
            return Err(AudioError::UnsupportedWav(format!("{fmt:?} {bits}-bit")));
        }
    };
    let mono = interleaved
        .chunks(channels)
        .map(|c| c.iter().sum::<f64>() / channels as f64)
        .collect();
    AudioTrack::from_clipped(spec.sample_rate, mono)
}

pub fn read_wav_file(path: impl AsRef<Path>) -> Result<Clipped, AudioError> {
    let file = std::io::BufReader::new(std::fs::File::open(path).map_err(hound::Error::from)?);
    read_wav(file)
}

/// Writes a mono WAV stream.
pub fn write_wav<W: Write + Seek>(
    track: &AudioTrack,
    writer: W,
    encoding: WavEncoding,
) -> Result<(), AudioError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: track.sample_rate,
        bits_per_sample: match encoding {
            WavEncoding::Float32 => 32,
            WavEncoding::Pcm16 => 16,
        },
        sample_format: match encoding {
            WavEncoding::Float32 => hound::SampleFormat::Float,
            WavEncoding::Pcm16 => hound::SampleFormat::Int,
        },
    };
    let mut w = hound::WavWriter::new(writer, spec)?;
    for &s in &track.samples {
        match encoding {
            WavEncoding::Float32 => w.write_sample(s)?,
            WavEncoding::Pcm16 => {
                let v = (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                w.write_sample(v)?
            }
        }
    }
    w.finalize()?;
    Ok(())
}

pub fn write_wav_file(
    track: &AudioTrack,
    path: impl AsRef<Path>,
    encoding: WavEncoding,
) -> Result<(), AudioError> {
    let file = std::io::BufWriter::new(std::fs::File::create(path).map_err(hound::Error::from)?);
    write_wav(track, file, encoding)
}

/// Encodes a track to WAV bytes in memory.
pub fn wav_bytes(track: &AudioTrack, encoding: WavEncoding) -> Result<Vec<u8>, AudioError> {
    let mut cursor = std::io::Cursor::new(Vec::new());
    write_wav(track, &mut cursor, encoding)?;
    Ok(cursor.into_inner())
}
