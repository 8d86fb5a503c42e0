//! Drives a script through the relay in advisory mode over the in-process
//! transport, on the same logical clock [`run`](super::sim::run) uses.

use std::collections::BTreeMap;
use std::sync::mpsc::Receiver;

use crate::harness::scenario::ScenarioScript;
use crate::harness::sim::{tick_count, tick_ms, HarnessError, TrackDriver};
use crate::model::ParamOverrides;
use crate::protocol::relay::{channel, ConnId, Relay, RelayConfig};
use crate::protocol::wire::{decode_message, encode_state, AdvisoryMessage, Message};

/// Advisories received by each scripted client, tick by tick.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdvisoryLog {
    pub by_id: BTreeMap<String, Vec<(f64, AdvisoryMessage)>>,
    /// State messages each client received from its peers.
    pub peer_messages: BTreeMap<String, usize>,
}

pub fn replay_through_relay(
    script: &ScenarioScript,
    extra: Option<&ParamOverrides>,
) -> Result<AdvisoryLog, HarnessError> {
    if let Some(id) = &script.controlled_id {
        return Err(HarnessError::Controlled(id.clone()));
    }
    let params = script.engine_params(extra)?;
    let mut relay = Relay::new(RelayConfig { params, advisory: true, origin: Some(script.frame_origin(extra)) })?;
    let mut driver = TrackDriver::new(script.clone(), extra)?;

    let mut clients: BTreeMap<String, (ConnId, Receiver<String>)> = BTreeMap::new();
    for track in script.scripted_tracks() {
        let (sink, rx) = channel();
        clients.insert(track.id.clone(), (relay.attach(sink), rx));
    }

    let mut log = AdvisoryLog::default();
    for tick in 0..tick_count(script.duration(), params.update_period) {
        let now = tick_ms(tick, params.update_period);
        for msg in driver.messages_at(now)? {
            let (conn, _) = &clients[&msg.id];
            relay.receive(*conn, &encode_state(&msg), now)?;
        }
        relay.tick(now);
        for (id, (_, rx)) in &clients {
            for text in rx.try_iter() {
                match decode_message(&text) {
                    Ok(Message::Advisory(a)) => log.by_id.entry(id.clone()).or_default().push((now as f64 / 1000.0, a)),
                    Ok(Message::State(_)) => *log.peer_messages.entry(id.clone()).or_default() += 1,
                    Err(_) => {}
                }
            }
        }
    }
    Ok(log)
}
