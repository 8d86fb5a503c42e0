//! Relay wire format and the broadcast/advisory sequencer.

pub mod relay;
pub mod wire;

pub use relay::{
    channel, ClientSession, ConnId, Disconnected, Outbound, Relay, RelayConfig, RelayError, RelayStats, TickReport,
};
pub use wire::{
    decode_advisory, decode_message, decode_state, encode_advisory, encode_state, AdvisoryMessage, Message,
    ProtocolError, StateMessage, ZoneWire,
};
