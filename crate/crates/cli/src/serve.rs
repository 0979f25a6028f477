//! WebSocket + HTTP adapter. Every connection speaks for one roster user,
//! chosen with `/ws?user=<id>`; deliveries are fanned out to the
//! connections of their recipients.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use anyhow::{Context, Result};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use orgmem_core::gateway::adapter::{SimulatedAdapter, TimelineEntry};
use orgmem_core::gateway::protocol::ProtocolMessage;
use orgmem_core::gateway::{ErrorCode, Gateway};
use orgmem_core::ids::UserId;
use tokio::sync::broadcast;

use crate::commands::load_config;
use crate::Common;

const FANOUT_CAPACITY: usize = 1024;

pub struct Shared {
    /// One gateway, one writer: events are processed one at a time.
    adapter: Mutex<SimulatedAdapter>,
    fanout: broadcast::Sender<(UserId, ProtocolMessage)>,
}

impl Shared {
    pub fn new(gateway: Gateway) -> Arc<Self> {
        let (fanout, _) = broadcast::channel(FANOUT_CAPACITY);
        Arc::new(Self {
            adapter: Mutex::new(SimulatedAdapter::new(gateway)),
            fanout,
        })
    }

    fn adapter(&self) -> std::sync::MutexGuard<'_, SimulatedAdapter> {
        self.adapter
            .lock()
            .unwrap_or_else(|poisoned| poisoned.into_inner())
    }
}

pub fn run(common: &Common, bind: &str) -> Result<()> {
    let config = load_config(common)?;
    let gateway = Gateway::open(config)?;
    let shared = Shared::new(gateway);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting async runtime")?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .with_context(|| format!("binding {bind}"))?;
        let addr = listener.local_addr()?;
        println!("listening on http://{addr}");
        tracing::info!(%addr, "serving");
        axum::serve(listener, router(shared))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .context("server failed")
    })
}

pub fn router(shared: Arc<Shared>) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/stats", get(stats))
        .route("/repo/file", get(repo_file))
        .route("/ws", get(upgrade))
        .with_state(shared)
}

async fn stats(State(shared): State<Arc<Shared>>) -> Response {
    let report = shared.adapter().gateway().stats();
    (
        [(header::CONTENT_TYPE, "application/json")],
        report.to_json(),
    )
        .into_response()
}

async fn repo_file(
    State(shared): State<Arc<Shared>>,
    Query(query): Query<HashMap<String, String>>,
) -> Response {
    let Some(path) = query.get("path") else {
        return (StatusCode::BAD_REQUEST, "missing path parameter").into_response();
    };
    let snapshot = shared.adapter().gateway().store().snapshot();
    match snapshot.files.get(path) {
        Some(body) => (
            [(header::CONTENT_TYPE, "text/markdown; charset=utf-8")],
            body.clone(),
        )
            .into_response(),
        None => (StatusCode::NOT_FOUND, format!("no file {path}")).into_response(),
    }
}

async fn upgrade(
    ws: WebSocketUpgrade,
    State(shared): State<Arc<Shared>>,
    Query(query): Query<HashMap<String, String>>,
) -> Response {
    let Some(user) = query.get("user").map(UserId::new) else {
        return (StatusCode::BAD_REQUEST, "missing user parameter").into_response();
    };
    let known = shared
        .adapter()
        .gateway()
        .config()
        .roster
        .get(&user)
        .is_some_and(|e| e.active);
    if !known {
        return (
            StatusCode::FORBIDDEN,
            format!("{user} is not an active roster member"),
        )
            .into_response();
    }
    ws.on_upgrade(move |socket| session(socket, shared, user))
}

fn encode(message: &ProtocolMessage) -> Message {
    Message::Text(
        serde_json::to_string(message)
            .expect("protocol messages serialize")
            .into(),
    )
}

async fn session(socket: WebSocket, shared: Arc<Shared>, user: UserId) {
    let (mut tx, mut rx) = socket.split();
    let mut deliveries = shared.fanout.subscribe();
    let hello = ProtocolMessage::snapshot(&shared.adapter(), &user);
    if tx.send(encode(&hello)).await.is_err() {
        return;
    }
    tracing::info!(%user, "client connected");
    loop {
        tokio::select! {
            inbound = rx.next() => {
                let text = match inbound {
                    Some(Ok(Message::Text(text))) => text,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                if let Some(reply) = handle(&shared, &user, text.as_str()).await {
                    if tx.send(encode(&reply)).await.is_err() {
                        break;
                    }
                }
            }
            outbound = deliveries.recv() => match outbound {
                Ok((recipient, message)) if recipient == user => {
                    if tx.send(encode(&message)).await.is_err() {
                        break;
                    }
                }
                Ok(_) => {}
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    tracing::warn!(%user, skipped = n, "client fell behind; reconnect and request a snapshot");
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
        }
    }
    tracing::info!(%user, "client disconnected");
}

fn protocol_error(code: ErrorCode, message: impl Into<String>) -> ProtocolMessage {
    ProtocolMessage::Error {
        code,
        message: message.into(),
    }
}

/// Handles one client frame; returns a direct reply, if any.
async fn handle(shared: &Arc<Shared>, user: &UserId, text: &str) -> Option<ProtocolMessage> {
    let message: ProtocolMessage = match serde_json::from_str(text) {
        Ok(m) => m,
        Err(err) => {
            return Some(protocol_error(
                ErrorCode::Protocol,
                format!("malformed message: {err}"),
            ))
        }
    };
    match message {
        ProtocolMessage::SnapshotRequest { .. } => {
            Some(ProtocolMessage::snapshot(&shared.adapter(), user))
        }
        ProtocolMessage::Event { event } => {
            if event.author != *user {
                return Some(protocol_error(
                    ErrorCode::Unauthorized,
                    "events must be authored by the connected user",
                ));
            }
            let shared = Arc::clone(shared);
            let outcome = tokio::task::spawn_blocking(move || {
                let mut adapter = shared.adapter();
                let deliveries = adapter.send(&event)?;
                // fan out under the lock so every client sees one global order
                for d in deliveries {
                    let message = match d.entry {
                        TimelineEntry::Event { event } => ProtocolMessage::Event { event },
                        TimelineEntry::Action { action } => ProtocolMessage::Action { action },
                    };
                    let _ = shared.fanout.send((d.recipient, message));
                }
                Ok::<_, orgmem_core::gateway::GatewayError>(())
            })
            .await;
            match outcome {
                Ok(Ok(())) => None,
                Ok(Err(err)) => {
                    tracing::error!(%err, "event processing failed");
                    Some(protocol_error(ErrorCode::Store, err.to_string()))
                }
                Err(err) => Some(protocol_error(
                    ErrorCode::Store,
                    format!("event processing panicked: {err}"),
                )),
            }
        }
        other => Some(protocol_error(
            ErrorCode::Protocol,
            format!(
                "clients may only send events and snapshot requests, got {}",
                kind(&other)
            ),
        )),
    }
}

fn kind(message: &ProtocolMessage) -> &'static str {
    match message {
        ProtocolMessage::Event { .. } => "event",
        ProtocolMessage::SnapshotRequest { .. } => "snapshot_request",
        ProtocolMessage::Snapshot { .. } => "snapshot",
        ProtocolMessage::Action { .. } => "action",
        ProtocolMessage::Error { .. } => "error",
    }
}
