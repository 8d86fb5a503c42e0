//! Text wire format: one JSON object per WebSocket text frame.
//!
//! Encoding is canonical: keys appear in a fixed order, latitude and
//! longitude carry seven decimals, all other reals three.

use std::fmt::Write as _;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::contamination::ZoneKind;
use crate::prediction::WarningKind;

pub const STATE_TYPE: &str = "state";
pub const ADVISORY_TYPE: &str = "advisory";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    MalformedMessage(String),
    #[error("unknown message type {0:?}")]
    UnknownType(String),
    #[error("missing or ill-typed field {0}")]
    FieldError(&'static str),
}

/// One pedestrian update as published by a client.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMessage {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub speed_mps: f64,
    /// Compass degrees clockwise from North, in [0, 360).
    pub heading_deg: f64,
    pub healthy: bool,
    pub t_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneWire {
    pub lat: f64,
    pub lon: f64,
    pub radius_m: f64,
    pub level_pct: f64,
    pub kind: ZoneKind,
}

/// Server-computed warning for one client.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvisoryMessage {
    pub id: String,
    pub state: WarningKind,
    pub ttc_s: Option<f64>,
    pub zones: Vec<ZoneWire>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    State(StateMessage),
    Advisory(AdvisoryMessage),
}

pub(crate) fn push_fixed(out: &mut String, v: f64, decimals: usize) {
    let s = format!("{v:.decimals$}");
    // no "-0.000"
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        out.push_str(&s[1..]);
    } else {
        out.push_str(&s);
    }
}

pub(crate) fn push_str(out: &mut String, s: &str) {
    out.push_str(&serde_json::to_string(s).expect("string serializes"));
}

fn canonical_heading(h: f64) -> f64 {
    let r = (h * 1000.0).round() / 1000.0;
    if r >= 360.0 {
        r - 360.0
    } else {
        r
    }
}

pub fn encode_state(m: &StateMessage) -> String {
    let mut out = String::with_capacity(160);
    out.push_str("{\"type\":\"state\",\"id\":");
    push_str(&mut out, &m.id);
    out.push_str(",\"lat\":");
    push_fixed(&mut out, m.lat, 7);
    out.push_str(",\"lon\":");
    push_fixed(&mut out, m.lon, 7);
    out.push_str(",\"speed_mps\":");
    push_fixed(&mut out, m.speed_mps, 3);
    out.push_str(",\"heading_deg\":");
    push_fixed(&mut out, canonical_heading(m.heading_deg), 3);
    let _ = write!(out, ",\"healthy\":{},\"t_ms\":{}}}", m.healthy, m.t_ms);
    out
}

pub fn encode_advisory(m: &AdvisoryMessage) -> String {
    let mut out = String::with_capacity(96 + 96 * m.zones.len());
    out.push_str("{\"type\":\"advisory\",\"id\":");
    push_str(&mut out, &m.id);
    out.push_str(",\"state\":\"");
    out.push_str(m.state.as_str());
    out.push_str("\",\"ttc_s\":");
    match m.ttc_s {
        Some(t) => push_fixed(&mut out, t, 3),
        None => out.push_str("null"),
    }
    out.push_str(",\"zones\":[");
    for (i, z) in m.zones.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str("{\"lat\":");
        push_fixed(&mut out, z.lat, 7);
        out.push_str(",\"lon\":");
        push_fixed(&mut out, z.lon, 7);
        out.push_str(",\"radius_m\":");
        push_fixed(&mut out, z.radius_m, 3);
        out.push_str(",\"level_pct\":");
        push_fixed(&mut out, z.level_pct, 3);
        out.push_str(",\"kind\":\"");
        out.push_str(z.kind.as_str());
        out.push_str("\"}");
    }
    out.push_str("]}");
    out
}

fn parse_object(text: &str) -> Result<Map<String, Value>, ProtocolError> {
    match serde_json::from_str::<Value>(text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(other) => Err(ProtocolError::MalformedMessage(format!("expected an object, got {other}"))),
        Err(e) => Err(ProtocolError::MalformedMessage(e.to_string())),
    }
}

fn message_type(obj: &Map<String, Value>) -> Result<&str, ProtocolError> {
    obj.get("type").and_then(Value::as_str).ok_or(ProtocolError::FieldError("type"))
}

fn str_field(obj: &Map<String, Value>, name: &'static str) -> Result<String, ProtocolError> {
    obj.get(name).and_then(Value::as_str).map(str::to_owned).ok_or(ProtocolError::FieldError(name))
}

fn f64_field(obj: &Map<String, Value>, name: &'static str) -> Result<f64, ProtocolError> {
    obj.get(name).and_then(Value::as_f64).ok_or(ProtocolError::FieldError(name))
}

fn bool_field(obj: &Map<String, Value>, name: &'static str) -> Result<bool, ProtocolError> {
    obj.get(name).and_then(Value::as_bool).ok_or(ProtocolError::FieldError(name))
}

fn state_from(obj: &Map<String, Value>) -> Result<StateMessage, ProtocolError> {
    Ok(StateMessage {
        id: str_field(obj, "id")?,
        lat: f64_field(obj, "lat")?,
        lon: f64_field(obj, "lon")?,
        speed_mps: f64_field(obj, "speed_mps")?,
        heading_deg: f64_field(obj, "heading_deg")?,
        healthy: bool_field(obj, "healthy")?,
        t_ms: obj.get("t_ms").and_then(Value::as_u64).ok_or(ProtocolError::FieldError("t_ms"))?,
    })
}

fn zone_from(v: &Value) -> Result<ZoneWire, ProtocolError> {
    let obj = v.as_object().ok_or(ProtocolError::FieldError("zones"))?;
    let kind = match obj.get("kind").and_then(Value::as_str) {
        Some("LivePedestrian") => ZoneKind::LivePedestrian,
        Some("Trail") => ZoneKind::Trail,
        _ => return Err(ProtocolError::FieldError("kind")),
    };
    Ok(ZoneWire {
        lat: f64_field(obj, "lat")?,
        lon: f64_field(obj, "lon")?,
        radius_m: f64_field(obj, "radius_m")?,
        level_pct: f64_field(obj, "level_pct")?,
        kind,
    })
}

fn advisory_from(obj: &Map<String, Value>) -> Result<AdvisoryMessage, ProtocolError> {
    let state = obj
        .get("state")
        .and_then(Value::as_str)
        .and_then(WarningKind::parse)
        .ok_or(ProtocolError::FieldError("state"))?;
    let ttc_s = match obj.get("ttc_s") {
        None | Some(Value::Null) => None,
        Some(v) => Some(v.as_f64().ok_or(ProtocolError::FieldError("ttc_s"))?),
    };
    let zones = obj
        .get("zones")
        .and_then(Value::as_array)
        .ok_or(ProtocolError::FieldError("zones"))?
        .iter()
        .map(zone_from)
        .collect::<Result<_, _>>()?;
    Ok(AdvisoryMessage { id: str_field(obj, "id")?, state, ttc_s, zones })
}

/// Parses a client state line. Unknown keys are ignored.
pub fn decode_state(text: &str) -> Result<StateMessage, ProtocolError> {
    let obj = parse_object(text)?;
    match message_type(&obj)? {
        STATE_TYPE => state_from(&obj),
        other => Err(ProtocolError::UnknownType(other.to_owned())),
    }
}

pub fn decode_advisory(text: &str) -> Result<AdvisoryMessage, ProtocolError> {
    let obj = parse_object(text)?;
    match message_type(&obj)? {
        ADVISORY_TYPE => advisory_from(&obj),
        other => Err(ProtocolError::UnknownType(other.to_owned())),
    }
}

/// Parses either message kind.
pub fn decode_message(text: &str) -> Result<Message, ProtocolError> {
    let obj = parse_object(text)?;
    match message_type(&obj)? {
        STATE_TYPE => state_from(&obj).map(Message::State),
        ADVISORY_TYPE => advisory_from(&obj).map(Message::Advisory),
        other => Err(ProtocolError::UnknownType(other.to_owned())),
    }
}

impl StateMessage {
    /// The message as a receiver sees it after one encode/decode pass.
    pub fn canonical(&self) -> StateMessage {
        decode_state(&encode_state(self)).expect("canonical encoding decodes")
    }
}
