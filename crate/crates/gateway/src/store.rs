//! Read-only bundle store shared by every connection.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use eightcount_core::affordance::{serialize_affordance_track, UserCalibration};
use eightcount_core::audio::{render_at_rate, wav_bytes, AudioError, WavEncoding};
use eightcount_core::bundle::{read_bundle, AudioVariant, BundleError, LearningBundle, MANIFEST_FILE};
use eightcount_core::motion::serialize_pose_sequence;
use eightcount_core::session::PlaybackContext;
use eightcount_core::AllowedRates;
use serde::Serialize;

use crate::error::GatewayError;

/// WAV bytes keyed by variant and rate bits.
type RenderCache = HashMap<(AudioVariant, u64), Arc<Vec<u8>>>;

/// A loaded bundle plus everything sessions derive from it once.
#[derive(Debug)]
pub struct StoredBundle {
    pub id: String,
    pub bundle: LearningBundle,
    pub context: PlaybackContext,
    /// Reference-body measurements that live calibrations are compared against.
    pub reference: UserCalibration,
    rendered: Mutex<RenderCache>,
    motion: OnceLock<String>,
}

impl StoredBundle {
    pub fn new(
        id: impl Into<String>,
        bundle: LearningBundle,
        rates: AllowedRates,
    ) -> Result<Self, BundleError> {
        let id = id.into();
        let context = PlaybackContext::from_bundle(id.clone(), &bundle, rates)?;
        let reference = bundle.reference_calibration();
        Ok(Self {
            id,
            bundle,
            context,
            reference,
            rendered: Mutex::new(HashMap::new()),
            motion: OnceLock::new(),
        })
    }

    /// WAV bytes for `variant` played at `rate`; rendered once, then cached.
    pub fn audio_wav(&self, variant: AudioVariant, rate: f64) -> Result<Arc<Vec<u8>>, AudioError> {
        self.context.allowed_rates.check(rate)?;
        let key = (variant, rate.to_bits());
        if let Some(bytes) = self.rendered.lock().unwrap().get(&key) {
            return Ok(bytes.clone());
        }
        let track = render_at_rate(self.bundle.audio(variant), rate, &self.context.allowed_rates)?;
        let bytes = Arc::new(wav_bytes(&track, WavEncoding::Float32)?);
        self.rendered.lock().unwrap().insert(key, bytes.clone());
        Ok(bytes)
    }

    /// `{"reference": <pose-JSON>, "affordance": <affordance JSON>}`.
    pub fn motion_json(&self) -> &str {
        self.motion.get_or_init(|| {
            format!(
                "{{\"reference\":{},\"affordance\":{}}}",
                serialize_pose_sequence(&self.bundle.pose).trim_end(),
                serialize_affordance_track(&self.bundle.affordance).trim_end()
            )
        })
    }

    pub fn summary(&self) -> BundleSummary {
        let m = &self.bundle.manifest;
        BundleSummary {
            id: self.id.clone(),
            title: m.title.clone(),
            bpm: m.bpm,
            duration_s: m.duration_s,
            segments: m.segments.len(),
            fps: m.fps,
        }
    }
}

/// One row of `GET /bundles`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct BundleSummary {
    pub id: String,
    pub title: String,
    pub bpm: f64,
    pub duration_s: f64,
    pub segments: usize,
    pub fps: f64,
}

#[derive(Debug, Default)]
pub struct BundleStore {
    bundles: BTreeMap<String, Arc<StoredBundle>>,
}

impl BundleStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads every subdirectory of `root` that holds a manifest; the directory
    /// name is the bundle id. Bundles that fail to read or validate are skipped
    /// and returned alongside the store.
    pub fn open(root: &Path, rates: &AllowedRates) -> Result<(Self, Vec<GatewayError>), GatewayError> {
        if !root.is_dir() {
            return Err(GatewayError::BundleRoot(root.to_path_buf()));
        }
        let mut store = Self::new();
        let mut skipped = Vec::new();
        let mut dirs: Vec<_> = std::fs::read_dir(root)?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.join(MANIFEST_FILE).is_file())
            .collect();
        dirs.sort();
        for dir in dirs {
            let Some(id) = dir.file_name().and_then(|n| n.to_str()).map(str::to_owned) else {
                continue;
            };
            match read_bundle(&dir).and_then(|b| StoredBundle::new(id.clone(), b, rates.clone())) {
                Ok(stored) => {
                    store.bundles.insert(id, Arc::new(stored));
                }
                Err(source) => skipped.push(GatewayError::Bundle { id, source }),
            }
        }
        Ok((store, skipped))
    }

    pub fn insert(&mut self, stored: StoredBundle) {
        self.bundles.insert(stored.id.clone(), Arc::new(stored));
    }

    pub fn get(&self, id: &str) -> Option<Arc<StoredBundle>> {
        self.bundles.get(id).cloned()
    }

    pub fn list(&self) -> Vec<BundleSummary> {
        self.bundles.values().map(|b| b.summary()).collect()
    }

    pub fn len(&self) -> usize {
        self.bundles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bundles.is_empty()
    }
}
