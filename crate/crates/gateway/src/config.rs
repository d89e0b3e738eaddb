use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use eightcount_core::audio::DEFAULT_RATES;
use eightcount_core::motion::DEFAULT_SMOOTHING_ALPHA;
use serde::{Deserialize, Serialize};

use crate::error::GatewayError;

/// Overrides `bundle_root` when set.
pub const BUNDLE_ROOT_ENV: &str = "EIGHTCOUNT_BUNDLE_ROOT";

/// How the tick loop measures elapsed time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    /// Real elapsed time between ticks.
    #[default]
    Monotonic,
    /// Exactly `1 / fps` per tick, whatever the scheduler does. Handy for replays.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub host: IpAddr,
    pub port: u16,
    pub bundle_root: PathBuf,
    /// Session tick rate; one `frame` message per tick.
    pub fps: f64,
    pub allowed_rates: Vec<f64>,
    /// Queued frames per connection before the oldest is dropped.
    pub frame_queue: usize,
    pub smoothing_alpha: f64,
    pub clock: ClockMode,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            host: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 8080,
            bundle_root: PathBuf::from("bundles"),
            fps: 30.0,
            allowed_rates: DEFAULT_RATES.to_vec(),
            frame_queue: 64,
            smoothing_alpha: DEFAULT_SMOOTHING_ALPHA,
            clock: ClockMode::Monotonic,
        }
    }
}

impl ServerConfig {
    pub fn from_toml(text: &str) -> Result<Self, GatewayError> {
        toml::from_str(text).map_err(|e| GatewayError::Config(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml(&text)
    }

    /// Applies [`BUNDLE_ROOT_ENV`] if present.
    pub fn with_env(mut self) -> Self {
        if let Some(root) = std::env::var_os(BUNDLE_ROOT_ENV) {
            self.bundle_root = PathBuf::from(root);
        }
        self
    }

    pub fn addr(&self) -> SocketAddr {
        SocketAddr::new(self.host, self.port)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.fps.is_finite() && self.fps > 0.0 && self.fps <= 240.0) {
            return Err(GatewayError::Config(format!(
                "fps must be in (0, 240], got {}",
                self.fps
            )));
        }
        if !(self.smoothing_alpha > 0.0 && self.smoothing_alpha <= 1.0) {
            return Err(GatewayError::Config(format!(
                "smoothing_alpha must be in (0, 1], got {}",
                self.smoothing_alpha
            )));
        }
        if self.frame_queue == 0 {
            return Err(GatewayError::Config("frame_queue must be at least 1".into()));
        }
        eightcount_core::AllowedRates::new(self.allowed_rates.clone())
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(())
    }
}
