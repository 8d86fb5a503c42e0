//! Session registry and broadcast sequencer.
//!
//! The relay is transport-agnostic: connections are represented by an
//! [`Outbound`] sink, and the owner feeds it received text plus a clock
//! reading. Everything happens on `&mut self`, so a single owner (a task in
//! live mode, a loop in harness mode) sequences all mutation. Sinks must not
//! block; the in-process and WebSocket sinks both push onto an unbounded
//! queue.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::engine::{Engine, EngineError};
use crate::geodesy::GeoPoint;
use crate::model::EngineParams;
use crate::protocol::wire::{
    decode_state, encode_advisory, encode_state, AdvisoryMessage, ProtocolError, StateMessage,
};

pub type ConnId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("peer is gone")]
pub struct Disconnected;

/// Write half of a client connection.
pub trait Outbound: Send + Sync {
    fn send(&self, text: &str) -> Result<(), Disconnected>;
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RelayError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Rejected(#[from] EngineError),
    #[error("unknown connection {0}")]
    UnknownConnection(ConnId),
    #[error("connection already speaks for {claimed:?}, got a message for {got:?}")]
    IdMismatch { claimed: String, got: String },
}

#[derive(Debug, Clone, Default)]
pub struct RelayConfig {
    pub params: EngineParams<f64>,
    pub advisory: bool,
    /// Fixed frame origin; otherwise the first accepted position.
    pub origin: Option<GeoPoint<f64>>,
}

/// A claimed client: one per pedestrian id.
#[derive(Clone)]
pub struct ClientSession {
    pub id: String,
    pub last_seen: u64,
    pub conn: ConnId,
    sink: Arc<dyn Outbound>,
}

impl std::fmt::Debug for ClientSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClientSession")
            .field("id", &self.id)
            .field("last_seen", &self.last_seen)
            .field("conn", &self.conn)
            .finish()
    }
}

struct Connection {
    sink: Arc<dyn Outbound>,
    claimed: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RelayStats {
    pub accepted: u64,
    pub rejected: u64,
    pub delivered: u64,
    pub send_failures: u64,
    pub advisories: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TickReport {
    pub evicted: Vec<String>,
    pub advisories: Vec<AdvisoryMessage>,
}

pub struct Relay {
    config: RelayConfig,
    engine: Engine<f64>,
    connections: BTreeMap<ConnId, Connection>,
    sessions: BTreeMap<String, ClientSession>,
    next_conn: ConnId,
    stats: RelayStats,
}

impl Relay {
    pub fn new(config: RelayConfig) -> Result<Self, EngineError> {
        let engine = Engine::new(config.params, config.origin)?;
        Ok(Relay {
            config,
            engine,
            connections: BTreeMap::new(),
            sessions: BTreeMap::new(),
            next_conn: 1,
            stats: RelayStats::default(),
        })
    }

    pub fn config(&self) -> &RelayConfig {
        &self.config
    }

    pub fn engine(&self) -> &Engine<f64> {
        &self.engine
    }

    pub fn stats(&self) -> RelayStats {
        self.stats
    }

    pub fn sessions(&self) -> impl Iterator<Item = &ClientSession> {
        self.sessions.values()
    }

    pub fn session(&self, id: &str) -> Option<&ClientSession> {
        self.sessions.get(id)
    }

    /// Registers a new connection; it claims an id with its first message.
    pub fn attach(&mut self, sink: Arc<dyn Outbound>) -> ConnId {
        let conn = self.next_conn;
        self.next_conn += 1;
        self.connections.insert(conn, Connection { sink, claimed: None });
        conn
    }

    /// Forgets a closed connection and the session it held, if still current.
    pub fn detach(&mut self, conn: ConnId) -> Option<String> {
        let id = self.connections.remove(&conn)?.claimed?;
        if self.sessions.get(&id).is_some_and(|s| s.conn == conn) {
            self.drop_session(&id);
            Some(id)
        } else {
            None
        }
    }

    fn drop_session(&mut self, id: &str) {
        if let Some(s) = self.sessions.remove(id) {
            if let Some(c) = self.connections.get_mut(&s.conn) {
                c.claimed = None;
            }
        }
        self.engine.remove(id);
    }

    /// Handles one text frame from `conn`: decode, validate, claim, fan out.
    /// Returns the number of peers the message was delivered to. Rejected
    /// messages are dropped and the sender's previous state is kept.
    pub fn receive(&mut self, conn: ConnId, text: &str, now: u64) -> Result<usize, RelayError> {
        let claimed = match self.connections.get(&conn) {
            Some(c) => c.claimed.clone(),
            None => return Err(RelayError::UnknownConnection(conn)),
        };
        let msg = decode_state(text).inspect_err(|_| self.stats.rejected += 1)?;
        if let Some(claimed) = claimed {
            if claimed != msg.id {
                self.stats.rejected += 1;
                return Err(RelayError::IdMismatch { claimed, got: msg.id });
            }
        }
        if let Err(e) = self.engine.ingest(&msg, now) {
            self.stats.rejected += 1;
            return Err(e.into());
        }
        self.stats.accepted += 1;
        self.claim(conn, &msg.id, now);
        Ok(self.broadcast(conn, &msg))
    }

    /// Binds `id` to `conn`, displacing any older connection for the same id.
    fn claim(&mut self, conn: ConnId, id: &str, now: u64) {
        let sink = self.connections[&conn].sink.clone();
        if let Some(old) = self.sessions.get(id) {
            if old.conn != conn {
                if let Some(c) = self.connections.get_mut(&old.conn) {
                    c.claimed = None;
                }
            }
        }
        self.connections.get_mut(&conn).expect("attached").claimed = Some(id.to_owned());
        let session = self.sessions.entry(id.to_owned()).or_insert_with(|| ClientSession {
            id: id.to_owned(),
            last_seen: now,
            conn,
            sink: sink.clone(),
        });
        session.conn = conn;
        session.sink = sink;
        session.last_seen = session.last_seen.max(now);
    }

    /// Sends `m` to every attached connection except `from` and any
    /// connection speaking for the same id. A failing receiver is detached
    /// after the loop; the others still get the message.
    pub fn broadcast(&mut self, from: ConnId, m: &StateMessage) -> usize {
        let text = encode_state(m);
        let mut delivered = 0;
        let mut failed = Vec::new();
        for (&conn, c) in &self.connections {
            if conn == from || c.claimed.as_deref() == Some(m.id.as_str()) {
                continue;
            }
            match c.sink.send(&text) {
                Ok(()) => delivered += 1,
                Err(Disconnected) => failed.push(conn),
            }
        }
        self.stats.delivered += delivered as u64;
        self.stats.send_failures += failed.len() as u64;
        for conn in failed {
            self.detach(conn);
        }
        delivered
    }

    /// Removes sessions silent for longer than the stale timeout.
    pub fn evict_stale(&mut self, now: u64) -> Vec<String> {
        let timeout = self.config.params.stale_timeout_ms();
        let stale: Vec<String> = self
            .sessions
            .values()
            .filter(|s| now.saturating_sub(s.last_seen) > timeout)
            .map(|s| s.id.clone())
            .collect();
        for id in &stale {
            self.drop_session(id);
        }
        stale
    }

    /// Prunes the field and sends each live client one advisory.
    pub fn advisory_tick(&mut self, now: u64) -> Vec<AdvisoryMessage> {
        let assessments = self.engine.tick(now);
        let mut sent = Vec::with_capacity(assessments.len());
        let mut failed = Vec::new();
        for a in &assessments {
            let Some(session) = self.sessions.get(&a.state.id) else { continue };
            let adv = self.engine.advisory(a);
            match session.sink.send(&encode_advisory(&adv)) {
                Ok(()) => sent.push(adv),
                Err(Disconnected) => failed.push(session.conn),
            }
        }
        self.stats.advisories += sent.len() as u64;
        self.stats.send_failures += failed.len() as u64;
        for conn in failed {
            self.detach(conn);
        }
        sent
    }

    /// One sequencer tick: evict, then prune and (in advisory mode) advise.
    pub fn tick(&mut self, now: u64) -> TickReport {
        let evicted = self.evict_stale(now);
        let advisories = if self.config.advisory {
            self.advisory_tick(now)
        } else {
            self.engine.prune(now);
            Vec::new()
        };
        TickReport { evicted, advisories }
    }
}

/// In-process sink backed by a std channel.
pub struct ChannelSink(std::sync::mpsc::Sender<String>);

impl Outbound for ChannelSink {
    fn send(&self, text: &str) -> Result<(), Disconnected> {
        self.0.send(text.to_owned()).map_err(|_| Disconnected)
    }
}

/// A sink and the receiving end a test or harness client reads from.
pub fn channel() -> (Arc<dyn Outbound>, std::sync::mpsc::Receiver<String>) {
    let (tx, rx) = std::sync::mpsc::channel();
    (Arc::new(ChannelSink(tx)), rx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EngineParams;
    use crate::prediction::WarningKind;
    use crate::protocol::wire::{decode_advisory, decode_state};
    use std::sync::mpsc::Receiver;

    fn line(id: &str, lat: f64, healthy: bool, t_ms: u64) -> String {
        encode_state(&StateMessage { id: id.into(), lat, lon: -83.0, speed_mps: 0.0, heading_deg: 0.0, healthy, t_ms })
    }

    fn relay(advisory: bool) -> Relay {
        Relay::new(RelayConfig {
            params: EngineParams::demo(),
            advisory,
            origin: Some(GeoPoint { lat: 40.0, lon: -83.0 }),
        })
        .unwrap()
    }

    fn client(r: &mut Relay) -> (ConnId, Receiver<String>) {
        let (sink, rx) = channel();
        (r.attach(sink), rx)
    }

    #[test]
    fn lone_sender_delivers_nothing() {
        let mut r = relay(false);
        let (a, rx) = client(&mut r);
        assert_eq!(r.receive(a, &line("a", 40.0, true, 0), 0), Ok(0));
        assert!(rx.try_recv().is_err());
    }

    #[test]
    fn fan_out_skips_sender() {
        let mut r = relay(false);
        let clients: Vec<_> = (0..10).map(|_| client(&mut r)).collect();
        for (i, (c, _)) in clients.iter().enumerate() {
            r.receive(*c, &line(&format!("p{i}"), 40.0, true, 0), 0).unwrap();
        }
        // drain join-time traffic
        for (_, rx) in &clients {
            while rx.try_recv().is_ok() {}
        }
        let n = r.receive(clients[0].0, &line("p0", 40.0001, true, 1000), 1000).unwrap();
        assert_eq!(n, 9);
        assert!(clients[0].1.try_recv().is_err());
        for (_, rx) in &clients[1..] {
            let got = decode_state(&rx.try_recv().unwrap()).unwrap();
            assert_eq!(got.id, "p0");
            assert!(rx.try_recv().is_err());
        }
    }

    #[test]
    fn dead_receiver_does_not_block_others() {
        let mut r = relay(false);
        let (a, _rxa) = client(&mut r);
        let (b, rxb) = client(&mut r);
        let (c, rxc) = client(&mut r);
        r.receive(b, &line("b", 40.0, true, 0), 0).unwrap();
        r.receive(c, &line("c", 40.0, true, 0), 0).unwrap();
        drop(rxb);
        assert_eq!(r.receive(a, &line("a", 40.0, true, 0), 0), Ok(1));
        assert_eq!(decode_state(&rxc.try_iter().last().unwrap()).unwrap().id, "a");
        assert!(r.session("b").is_none());
        assert_eq!(r.stats().send_failures, 1);
    }

    #[test]
    fn invalid_messages_are_dropped() {
        let mut r = relay(false);
        let (a, _rx) = client(&mut r);
        assert!(matches!(r.receive(a, "garbage", 0), Err(RelayError::Protocol(_))));
        assert!(matches!(r.receive(a, &line("a", 95.0, true, 0), 0), Err(RelayError::Rejected(_))));
        assert!(r.session("a").is_none());
        r.receive(a, &line("a", 40.0, true, 5), 0).unwrap();
        assert!(matches!(r.receive(a, &line("b", 40.0, true, 6), 0), Err(RelayError::IdMismatch { .. })));
        assert!(matches!(r.receive(a, &line("a", 40.0, true, 1), 0), Err(RelayError::Rejected(_))));
        assert_eq!(r.stats().rejected, 4);
        assert_eq!(r.receive(99, &line("a", 40.0, true, 9), 0), Err(RelayError::UnknownConnection(99)));
    }

    #[test]
    fn reconnect_displaces_old_session() {
        let mut r = relay(false);
        let (old, _rx_old) = client(&mut r);
        r.receive(old, &line("a", 40.0, true, 0), 0).unwrap();
        let (new, _rx_new) = client(&mut r);
        r.receive(new, &line("a", 40.0, true, 1000), 1000).unwrap();
        assert_eq!(r.session("a").unwrap().conn, new);
        // closing the stale connection leaves the new session alone
        assert_eq!(r.detach(old), None);
        assert!(r.session("a").is_some());
        assert_eq!(r.detach(new), Some("a".into()));
        assert!(r.session("a").is_none());
        assert!(r.engine().peer("a").is_none());
    }

    #[test]
    fn stale_sessions_are_evicted() {
        let mut r = relay(false);
        let (a, _ra) = client(&mut r);
        let (b, _rb) = client(&mut r);
        r.receive(a, &line("a", 40.0, true, 0), 0).unwrap();
        r.receive(b, &line("b", 40.0, true, 0), 0).unwrap();
        assert!(r.evict_stale(5000).is_empty());
        r.receive(b, &line("b", 40.0, true, 6000), 6000).unwrap();
        assert_eq!(r.evict_stale(6000), vec!["a".to_string()]);
        assert!(r.engine().peer("a").is_none());
        // a silent connection may come back
        r.receive(a, &line("a", 40.0, true, 7000), 7000).unwrap();
        assert!(r.session("a").is_some());
    }

    #[test]
    fn advisories_one_per_client_per_tick() {
        let mut r = relay(true);
        let (a, ra) = client(&mut r);
        r.receive(a, &line("a", 40.0, true, 0), 0).unwrap();
        for k in 0..3u64 {
            let report = r.tick(k * 1000);
            assert_eq!(report.advisories.len(), 1);
            let adv = decode_advisory(&ra.try_recv().unwrap()).unwrap();
            assert_eq!(adv.state, WarningKind::AreaSafe);
            assert!(adv.zones.is_empty());
            assert!(ra.try_recv().is_err());
        }
    }
}
