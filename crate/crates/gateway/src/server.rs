//! HTTP endpoints and the per-connection session loop.
//!
//! | route | response |
//! |---|---|
//! | `GET /bundles` | JSON list of bundle summaries |
//! | `GET /bundles/{id}/manifest` | the bundle's canonical `manifest.json` |
//! | `GET /bundles/{id}/audio/{variant}?rate=r` | float WAV of `mixed`, `music` or `beat` at rate `r` (default 1) |
//! | `GET /bundles/{id}/motion` | reference pose and affordance track |
//! | `GET /session/{id}` | WebSocket upgrade, see [`crate::protocol`] |

use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use eightcount_core::bundle::AudioVariant;
use futures::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::time::MissedTickBehavior;

use crate::config::{ClockMode, ServerConfig};
use crate::error::GatewayError;
use crate::live::{JitterStats, LiveSession};
use crate::outbox::Outbox;
use crate::protocol::{decode_client, encode, ServerMessage};
use crate::store::{BundleStore, StoredBundle};

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<BundleStore>,
    pub config: Arc<ServerConfig>,
}

impl AppState {
    pub fn new(store: BundleStore, config: ServerConfig) -> Self {
        Self {
            store: Arc::new(store),
            config: Arc::new(config),
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/bundles", get(list_bundles))
        .route("/bundles/{id}/manifest", get(manifest))
        .route("/bundles/{id}/audio/{variant}", get(audio))
        .route("/bundles/{id}/motion", get(motion))
        .route("/session/{id}", get(session))
        .with_state(state)
}

/// Loads the bundle root and serves until Ctrl-C.
pub async fn serve(config: ServerConfig) -> Result<(), GatewayError> {
    config.validate()?;
    let rates = eightcount_core::AllowedRates::new(config.allowed_rates.clone())
        .map_err(|e| GatewayError::Config(e.to_string()))?;
    let (store, skipped) = BundleStore::open(&config.bundle_root, &rates)?;
    for e in &skipped {
        tracing::warn!("skipping {e}");
    }
    tracing::info!(bundles = store.len(), root = %config.bundle_root.display(), "bundle store loaded");
    let addr = config.addr();
    let listener = TcpListener::bind(addr)
        .await
        .map_err(|source| GatewayError::Bind { addr, source })?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(AppState::new(store, config)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

/// Serves on an already-bound listener; used by tests and embedders.
pub async fn serve_on(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub detail: String,
    #[serde(skip)]
    status: Option<StatusCode>,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, detail: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            detail: detail.into(),
            status: Some(status),
        }
    }

    fn unknown_bundle(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "unknown-bundle",
            format!("no bundle `{id}`"),
        )
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status.unwrap_or(StatusCode::BAD_REQUEST), Json(&self)).into_response()
    }
}

fn lookup(state: &AppState, id: &str) -> Result<Arc<StoredBundle>, ApiError> {
    state.store.get(id).ok_or_else(|| ApiError::unknown_bundle(id))
}

async fn list_bundles(State(state): State<AppState>) -> impl IntoResponse {
    Json(state.store.list())
}

async fn manifest(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let b = lookup(&state, &id)?;
    Ok((
        [(header::CONTENT_TYPE, "application/json")],
        b.bundle.manifest.to_canonical_json(),
    )
        .into_response())
}

#[derive(Debug, Deserialize)]
struct AudioQuery {
    rate: Option<f64>,
}

async fn audio(
    State(state): State<AppState>,
    Path((id, variant)): Path<(String, String)>,
    Query(q): Query<AudioQuery>,
) -> Result<Response, ApiError> {
    let b = lookup(&state, &id)?;
    let variant: AudioVariant = variant
        .parse()
        .map_err(|e: String| ApiError::new(StatusCode::NOT_FOUND, "unknown-variant", e))?;
    let rate = q.rate.unwrap_or(1.0);
    if !b.context.allowed_rates.contains(rate) {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "rate-not-allowed",
            format!("rate {rate} not in {:?}", b.context.allowed_rates.as_slice()),
        ));
    }
    let bytes = tokio::task::spawn_blocking(move || b.audio_wav(variant, rate))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "render-failed", e.to_string()))?
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "render-failed", e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "audio/wav")], bytes.as_ref().clone()).into_response())
}

async fn motion(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let b = lookup(&state, &id)?;
    Ok((
        [(header::CONTENT_TYPE, "application/json")],
        b.motion_json().to_owned(),
    )
        .into_response())
}

async fn session(ws: WebSocketUpgrade, State(state): State<AppState>, Path(id): Path<String>) -> Response {
    ws.on_upgrade(move |socket| run_connection(socket, state, id))
}

async fn run_connection(socket: WebSocket, state: AppState, id: String) {
    let (mut sink, mut stream) = socket.split();
    let outbox = Arc::new(Outbox::new(state.config.frame_queue));
    let writer = {
        let outbox = outbox.clone();
        tokio::spawn(async move {
            while let Some(msg) = outbox.pop().await {
                if sink.send(Message::Text(encode(&msg).into())).await.is_err() {
                    break;
                }
            }
            let _ = sink.close().await;
        })
    };

    match state.store.get(&id) {
        Some(bundle) => match LiveSession::new(bundle, state.config.smoothing_alpha) {
            Ok(live) => drive_session(live, &mut stream, &outbox, &state.config).await,
            Err(e) => outbox.push(ServerMessage::error("config", e.to_string())),
        },
        None => {
            // Stay open so the client sees why; answer everything with the same error.
            let err = || ServerMessage::error("unknown-bundle", format!("no bundle `{id}`"));
            outbox.push(err());
            while let Some(Ok(msg)) = stream.next().await {
                match msg {
                    Message::Close(_) => break,
                    Message::Text(_) | Message::Binary(_) => outbox.push(err()),
                    _ => {}
                }
            }
        }
    }
    outbox.close();
    let _ = writer.await;
}

async fn drive_session(
    mut live: LiveSession,
    stream: &mut futures::stream::SplitStream<WebSocket>,
    outbox: &Outbox,
    config: &ServerConfig,
) {
    let period = 1.0 / config.fps;
    let mut interval = tokio::time::interval(Duration::from_secs_f64(period));
    interval.set_missed_tick_behavior(MissedTickBehavior::Delay);
    interval.tick().await;
    let mut last = Instant::now();
    let mut jitter = JitterStats::default();
    outbox.push(live.state_update());
    loop {
        tokio::select! {
            _ = interval.tick() => {
                let now = Instant::now();
                let measured = now.duration_since(last).as_secs_f64();
                last = now;
                jitter.record(measured, period);
                let dt = match config.clock {
                    ClockMode::Monotonic => measured,
                    ClockMode::Fixed => period,
                };
                outbox.push(live.tick(dt));
            }
            msg = stream.next() => match msg {
                Some(Ok(Message::Text(text))) => match decode_client(&text) {
                    Ok(m) => live.handle(m).into_iter().for_each(|r| outbox.push(r)),
                    Err(e) => outbox.push(ServerMessage::error("bad-message", e.to_string())),
                },
                Some(Ok(Message::Binary(_))) => {
                    outbox.push(ServerMessage::error("bad-message", "binary frames are not supported"));
                }
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => {}
            },
        }
    }
    tracing::info!(
        ticks = jitter.ticks,
        jitter_max_ms = jitter.max_s * 1e3,
        jitter_mean_ms = jitter.mean_s() * 1e3,
        frames_dropped = outbox.dropped(),
        "session closed"
    );
}
