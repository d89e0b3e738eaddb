use std::net::SocketAddr;
use std::path::PathBuf;

use eightcount_core::bundle::BundleError;
use eightcount_core::motion::MotionError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("bundle root {0} is not a directory")]
    BundleRoot(PathBuf),
    #[error("bundle `{id}`: {source}")]
    Bundle {
        id: String,
        #[source]
        source: BundleError,
    },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error("connection: {0}")]
    Connection(#[from] tokio_tungstenite::tungstenite::Error),
    #[error("server error `{code}`: {detail}")]
    Remote { code: String, detail: String },
    #[error("protocol: {0}")]
    Protocol(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
