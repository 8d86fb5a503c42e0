//! WebSocket front end for the relay.
//!
//! Each connection gets a reader task and a writer task. Readers forward
//! text frames to one sequencer task that owns the [`Relay`]; the sequencer
//! also owns the tick timer, so validation, fan-out, eviction and advisories
//! happen in a single order. Sends only push onto per-connection queues.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use safewalk_core::geodesy::GeoPoint;
use safewalk_core::model::{EngineParams, ParamOverrides};
use safewalk_core::protocol::{ConnId, Disconnected, Outbound, Relay, RelayConfig, RelayStats};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;

pub mod agents;

pub const STREAM_PATH: &str = "/v1/stream";
pub const DEFAULT_PORT: u16 = 8700;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("invalid engine parameters: {0}")]
    Engine(#[from] safewalk_core::engine::EngineError),
    #[error("tick rate must be positive and finite, got {0}")]
    TickRate(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub port: u16,
    pub advisory: bool,
    pub tick_hz: f64,
    pub params: EngineParams<f64>,
    pub origin: Option<GeoPoint<f64>>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            port: DEFAULT_PORT,
            advisory: false,
            tick_hz: 1.0,
            params: EngineParams::default(),
            origin: None,
        }
    }
}

impl ServerConfig {
    /// Applies a parameter file's overrides, including its optional origin.
    pub fn with_overrides(mut self, o: &ParamOverrides) -> Self {
        self.params = o.apply(self.params);
        if o.origin.is_some() {
            self.origin = o.origin;
        }
        self
    }
}

enum Command {
    Attach(Arc<dyn Outbound>, oneshot::Sender<ConnId>),
    Text(ConnId, String),
    Detach(ConnId),
    Stats(oneshot::Sender<RelayStats>),
}

struct QueueSink(mpsc::UnboundedSender<String>);

impl Outbound for QueueSink {
    fn send(&self, text: &str) -> Result<(), Disconnected> {
        self.0.send(text.to_owned()).map_err(|_| Disconnected)
    }
}

/// Handle to a running server.
pub struct Server {
    addr: SocketAddr,
    commands: mpsc::UnboundedSender<Command>,
    http: JoinHandle<()>,
    sequencer: JoinHandle<()>,
}

impl Server {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("ws://{}{}", self.addr, STREAM_PATH)
    }

    pub async fn stats(&self) -> Option<RelayStats> {
        let (tx, rx) = oneshot::channel();
        self.commands.send(Command::Stats(tx)).ok()?;
        rx.await.ok()
    }

    /// Runs until the listener fails.
    pub async fn wait(self) {
        let _ = self.http.await;
        self.sequencer.abort();
    }

    pub fn shutdown(self) {
        self.http.abort();
        self.sequencer.abort();
    }
}

/// Binds `127.0.0.1:port` (0 picks a free port) and starts serving.
pub async fn bind(config: ServerConfig) -> Result<Server, ServerError> {
    bind_addr(SocketAddr::from(([127, 0, 0, 1], config.port)), config).await
}

pub async fn bind_addr(addr: SocketAddr, config: ServerConfig) -> Result<Server, ServerError> {
    if !(config.tick_hz.is_finite() && config.tick_hz > 0.0) {
        return Err(ServerError::TickRate(config.tick_hz));
    }
    let relay = Relay::new(RelayConfig { params: config.params, advisory: config.advisory, origin: config.origin })?;
    let (commands, rx) = mpsc::unbounded_channel();
    let sequencer = tokio::spawn(sequence(relay, rx, Duration::from_secs_f64(1.0 / config.tick_hz)));

    let listener = TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let app = Router::new().route(STREAM_PATH, get(upgrade)).with_state(commands.clone());
    let http = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            tracing::error!("server stopped: {e}");
        }
    });
    tracing::info!(%addr, advisory = config.advisory, "listening on {STREAM_PATH}");
    Ok(Server { addr, commands, http, sequencer })
}

async fn sequence(mut relay: Relay, mut rx: mpsc::UnboundedReceiver<Command>, period: Duration) {
    let epoch = Instant::now();
    let now_ms = || epoch.elapsed().as_millis() as u64;
    let mut ticker = tokio::time::interval(period);
    ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        tokio::select! {
            cmd = rx.recv() => match cmd {
                Some(Command::Attach(sink, reply)) => {
                    let conn = relay.attach(sink);
                    let _ = reply.send(conn);
                }
                Some(Command::Text(conn, text)) => {
                    if let Err(e) = relay.receive(conn, &text, now_ms()) {
                        tracing::debug!(conn, "rejected: {e}");
                    }
                }
                Some(Command::Detach(conn)) => {
                    if let Some(id) = relay.detach(conn) {
                        tracing::debug!(conn, %id, "closed");
                    }
                }
                Some(Command::Stats(reply)) => {
                    let _ = reply.send(relay.stats());
                }
                None => break,
            },
            _ = ticker.tick() => {
                let report = relay.tick(now_ms());
                for id in report.evicted {
                    tracing::info!(%id, "evicted after silence");
                }
            }
        }
    }
}

async fn upgrade(ws: WebSocketUpgrade, State(commands): State<mpsc::UnboundedSender<Command>>) -> Response {
    ws.on_upgrade(move |socket| session(socket, commands))
}

async fn session(socket: WebSocket, commands: mpsc::UnboundedSender<Command>) {
    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<String>();
    let (reply_tx, reply_rx) = oneshot::channel();
    if commands.send(Command::Attach(Arc::new(QueueSink(out_tx)), reply_tx)).is_err() {
        return;
    }
    let Ok(conn) = reply_rx.await else { return };
    let (mut write, mut read) = socket.split();

    let writer = tokio::spawn(async move {
        while let Some(text) = out_rx.recv().await {
            if write.send(WsMessage::Text(text.into())).await.is_err() {
                break;
            }
        }
    });

    while let Some(frame) = read.next().await {
        match frame {
            Ok(WsMessage::Text(text)) => {
                if commands.send(Command::Text(conn, text.to_string())).is_err() {
                    break;
                }
            }
            Ok(WsMessage::Close(_)) | Err(_) => break,
            Ok(_) => {}
        }
    }
    let _ = commands.send(Command::Detach(conn));
    writer.abort();
}
