//! Service and command-line surface for eightcount bundles.
//!
//! - [`protocol`]: session message types (JSON over WebSocket)
//! - [`server`]: HTTP endpoints and the per-connection tick loop
//! - [`live`]: one learner's session, socket-free
//! - [`outbox`]: per-connection send queue with frame dropping
//! - [`store`]: shared read-only bundle store
//! - [`client`], [`replay`]: typed client and the replay pose source
//! - [`cli`]: the `eightcount` binary

pub mod cli;
pub mod client;
pub mod config;
pub mod error;
pub mod live;
pub mod outbox;
pub mod protocol;
pub mod replay;
pub mod server;
pub mod store;

pub use config::ServerConfig;
pub use error::GatewayError;
