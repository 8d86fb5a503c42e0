//! Scripted pedestrians driven against a live server.
//!
//! Every scripted track opens its own WebSocket, publishes one state message
//! per tick and runs its own engine on what it hears from peers, the way an
//! engine-embedding phone would. Advisories, if the server sends them, are
//! recorded alongside.

use std::collections::BTreeMap;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use safewalk_core::engine::Engine;
use safewalk_core::harness::{tick_count, tick_ms, HarnessError, ScenarioScript, TrackDriver};
use safewalk_core::model::ParamOverrides;
use safewalk_core::prediction::WarningKind;
use safewalk_core::protocol::{decode_message, encode_state, Message, StateMessage};
use thiserror::Error;
use tokio::sync::mpsc;
use tokio_tungstenite::tungstenite::Message as WsMessage;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("websocket: {0}")]
    Ws(#[from] tokio_tungstenite::tungstenite::Error),
    #[error("server closed the connection for {0:?}")]
    Closed(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AgentReport {
    /// Each agent's own per-tick warnings, computed locally.
    pub warnings: BTreeMap<String, Vec<WarningKind>>,
    /// Server advisories per agent, in arrival order.
    pub advisories: BTreeMap<String, Vec<WarningKind>>,
    /// Peer state messages each agent received.
    pub received: BTreeMap<String, usize>,
}

struct Inbox {
    id: String,
    text: String,
}

/// Plays `script` against `url`, one tick per `period`. Stops after the
/// last waypoint.
pub async fn run_agents(
    script: &ScenarioScript,
    url: &str,
    extra: Option<&ParamOverrides>,
    period: Duration,
    mut on_change: impl FnMut(f64, &str, WarningKind),
) -> Result<AgentReport, AgentError> {
    script.validate().map_err(HarnessError::from)?;
    let params = script.engine_params(extra).map_err(HarnessError::from)?;
    let mut driver = TrackDriver::new(script.clone(), extra)?;
    let origin = driver.frame().origin;

    let (inbox_tx, mut inbox) = mpsc::unbounded_channel::<Inbox>();
    let mut sinks = BTreeMap::new();
    let mut engines = BTreeMap::new();
    for track in script.scripted_tracks() {
        let (ws, _) = tokio_tungstenite::connect_async(url).await?;
        let (sink, mut stream) = ws.split();
        let tx = inbox_tx.clone();
        let id = track.id.clone();
        tokio::spawn(async move {
            while let Some(Ok(frame)) = stream.next().await {
                if let WsMessage::Text(text) = frame {
                    if tx.send(Inbox { id: id.clone(), text: text.to_string() }).is_err() {
                        break;
                    }
                }
            }
        });
        sinks.insert(track.id.clone(), sink);
        engines.insert(track.id.clone(), Engine::new(params, Some(origin)).map_err(HarnessError::from)?);
    }
    drop(inbox_tx);
    // the server registers a socket just after the handshake; give it a moment
    tokio::time::sleep(Duration::from_millis(50)).await;

    let mut report = AgentReport::default();
    let mut last: BTreeMap<String, WarningKind> = BTreeMap::new();
    let mut ticker = tokio::time::interval(period);
    for tick in 0..tick_count(script.duration(), params.update_period) {
        ticker.tick().await;
        let now = tick_ms(tick, params.update_period);
        while let Ok(msg) = inbox.try_recv() {
            absorb(&mut report, &mut engines, msg);
        }
        let messages: Vec<StateMessage> = driver.messages_at(now)?;
        for msg in &messages {
            let sink = sinks.get_mut(&msg.id).expect("one sink per track");
            sink.send(WsMessage::Text(encode_state(msg).into()))
                .await
                .map_err(|_| AgentError::Closed(msg.id.clone()))?;
            let engine = engines.get_mut(&msg.id).expect("one engine per track");
            engine.ingest(msg, now).map_err(HarnessError::from)?;
        }
        for msg in &messages {
            let engine = engines.get_mut(&msg.id).expect("one engine per track");
            engine.prune(now);
            let Some(a) = engine.assess(&msg.id, now) else { continue };
            let kind = a.warning.kind;
            report.warnings.entry(msg.id.clone()).or_default().push(kind);
            if last.insert(msg.id.clone(), kind) != Some(kind) {
                on_change(now as f64 / 1000.0, &msg.id, kind);
            }
        }
    }
    // let the last round of peer messages land
    tokio::time::sleep(period.max(Duration::from_millis(200))).await;
    while let Ok(msg) = inbox.try_recv() {
        absorb(&mut report, &mut engines, msg);
    }
    for (_, mut sink) in sinks {
        let _ = sink.close().await;
    }
    Ok(report)
}

fn absorb(report: &mut AgentReport, engines: &mut BTreeMap<String, Engine<f64>>, msg: Inbox) {
    match decode_message(&msg.text) {
        Ok(Message::State(s)) => {
            *report.received.entry(msg.id.clone()).or_default() += 1;
            if let Some(engine) = engines.get_mut(&msg.id) {
                let _ = engine.ingest(&s, s.t_ms);
            }
        }
        Ok(Message::Advisory(a)) => report.advisories.entry(msg.id).or_default().push(a.state),
        Err(e) => tracing::debug!(agent = %msg.id, "ignoring frame: {e}"),
    }
}
