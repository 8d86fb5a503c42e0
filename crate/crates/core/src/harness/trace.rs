//! Replay output: one event per pedestrian per tick, plus puff snapshots.

use std::fmt::Write as _;

use crate::geodesy::LocalPoint;
use crate::prediction::{AlertPattern, WarningKind, WarningState};
use crate::protocol::wire::{push_fixed, push_str};

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub t_s: f64,
    pub id: String,
    pub position: LocalPoint<f64>,
    pub warning: WarningState<f64>,
    pub zones_active: usize,
    pub alert: AlertPattern,
}

/// A puff as it stood at the end of a tick.
#[derive(Debug, Clone, PartialEq)]
pub struct PuffFrame {
    pub t_s: f64,
    pub emitter: String,
    pub center: LocalPoint<f64>,
    pub radius: f64,
    pub level_pct: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    /// Ordered by `(t_s, id)`.
    pub events: Vec<TraceEvent>,
    pub puffs: Vec<PuffFrame>,
}

impl TraceEvent {
    /// Fixed field order, reals at three decimals.
    pub fn to_line(&self) -> String {
        let mut out = String::with_capacity(200);
        out.push_str("{\"t_s\":");
        push_fixed(&mut out, self.t_s, 3);
        out.push_str(",\"id\":");
        push_str(&mut out, &self.id);
        out.push_str(",\"x\":");
        push_fixed(&mut out, self.position.x, 3);
        out.push_str(",\"y\":");
        push_fixed(&mut out, self.position.y, 3);
        let _ = write!(out, ",\"warning\":\"{}\",\"ttc_s\":", self.warning.kind.as_str());
        match self.warning.time_to_contact {
            Some(t) => push_fixed(&mut out, t, 3),
            None => out.push_str("null"),
        }
        out.push_str(",\"cause\":");
        match &self.warning.cause {
            Some(z) => {
                let _ = write!(out, "{{\"kind\":\"{}\",\"source\":", z.kind.as_str());
                push_str(&mut out, &z.source);
                out.push_str(",\"x\":");
                push_fixed(&mut out, z.area.center.x, 3);
                out.push_str(",\"y\":");
                push_fixed(&mut out, z.area.center.y, 3);
                out.push_str(",\"level_pct\":");
                push_fixed(&mut out, z.level, 3);
                out.push('}');
            }
            None => out.push_str("null"),
        }
        let _ = write!(out, ",\"zones_active\":{},\"alert\":\"{}\"}}", self.zones_active, self.alert.as_str());
        out
    }
}

impl Trace {
    /// Newline-delimited event records.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_line());
            out.push('\n');
        }
        out
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.events.iter().map(|e| e.id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn events_for<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a TraceEvent> + 'a {
        self.events.iter().filter(move |e| e.id == id)
    }

    /// Per-tick warning states of `id`.
    pub fn warnings(&self, id: &str) -> Vec<WarningKind> {
        self.events_for(id).map(|e| e.warning.kind).collect()
    }

    /// Consecutive duplicates collapsed: `[(state, ticks held)]`.
    pub fn warning_runs(&self, id: &str) -> Vec<(WarningKind, usize)> {
        collapse(&self.warnings(id))
    }

    /// Events where `id` changed state, with the state it left.
    pub fn transitions<'a>(&'a self, id: &'a str) -> Vec<(WarningKind, &'a TraceEvent)> {
        let events: Vec<&TraceEvent> = self.events_for(id).collect();
        events
            .windows(2)
            .filter(|w| w[0].warning.kind != w[1].warning.kind)
            .map(|w| (w[0].warning.kind, w[1]))
            .collect()
    }

    pub fn puffs_at(&self, t_s: f64) -> impl Iterator<Item = &PuffFrame> {
        self.puffs.iter().filter(move |p| p.t_s == t_s)
    }
}

/// Run-length encoding of a state sequence.
pub fn collapse(states: &[WarningKind]) -> Vec<(WarningKind, usize)> {
    let mut runs: Vec<(WarningKind, usize)> = Vec::new();
    for &s in states {
        match runs.last_mut() {
            Some((last, n)) if *last == s => *n += 1,
            _ => runs.push((s, 1)),
        }
    }
    runs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contamination::{RedZone, ZoneKind};
    use crate::model::Circle;

    #[test]
    fn line_format_is_fixed() {
        let e = TraceEvent {
            t_s: 3.0,
            id: "user".into(),
            position: LocalPoint::new(1.23456, -0.0001),
            warning: WarningState {
                kind: WarningKind::RedZonePredicted,
                cause: Some(RedZone {
                    area: Circle { center: LocalPoint::new(15.0, 2.0), radius: 9.144 },
                    level: 100.0 / 3.0,
                    kind: ZoneKind::Trail,
                    source: "sick".into(),
                }),
                time_to_contact: Some(2.5),
            },
            zones_active: 4,
            alert: AlertPattern::Intermittent,
        };
        assert_eq!(
            e.to_line(),
            r#"{"t_s":3.000,"id":"user","x":1.235,"y":0.000,"warning":"RedZonePredicted","ttc_s":2.500,"cause":{"kind":"Trail","source":"sick","x":15.000,"y":2.000,"level_pct":33.333},"zones_active":4,"alert":"Intermittent"}"#
        );
        let v: serde_json::Value = serde_json::from_str(&e.to_line()).unwrap();
        assert_eq!(v["zones_active"], 4);
    }

    #[test]
    fn collapse_runs() {
        use WarningKind::*;
        assert_eq!(
            collapse(&[AreaSafe, AreaSafe, RedZonePredicted, InRedZone, InRedZone, AreaSafe]),
            vec![(AreaSafe, 2), (RedZonePredicted, 1), (InRedZone, 2), (AreaSafe, 1)]
        );
        assert!(collapse(&[]).is_empty());
    }
}
