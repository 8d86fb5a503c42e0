//! The per-update pipeline shared by replay and the relay's advisory mode:
//! validate → emit puff, then once per tick prune → red zones → classify.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::contamination::{active_red_zones, emit_puff, ContaminationField, RedZone};
use crate::geodesy::{self, FrameOrigin, GeoError, GeoPoint};
use crate::model::{validate_state, EngineParams, ParamsError, PedestrianState, ValidationError};
use crate::prediction::{alert_signal, classify, AlertPattern, WarningState};
use crate::protocol::wire::{AdvisoryMessage, StateMessage, ZoneWire};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("invalid frame origin: {0}")]
    Frame(#[from] GeoError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

/// Outcome of classifying one pedestrian at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Assessment<T> {
    pub state: PedestrianState<T>,
    pub warning: WarningState<T>,
    pub alert: AlertPattern,
    pub zones: Vec<RedZone<T>>,
}

#[derive(Debug, Clone)]
pub struct Engine<T> {
    params: EngineParams<T>,
    frame: Option<FrameOrigin<T>>,
    peers: BTreeMap<String, PedestrianState<T>>,
    field: ContaminationField<T>,
}

impl<T: Scalar> Engine<T> {
    /// Without `origin` the frame is fixed by the first accepted message.
    pub fn new(params: EngineParams<T>, origin: Option<GeoPoint<T>>) -> Result<Self, EngineError> {
        params.validate()?;
        let frame = origin.map(FrameOrigin::new).transpose()?;
        Ok(Engine { params, frame, peers: BTreeMap::new(), field: ContaminationField::new() })
    }

    pub fn params(&self) -> &EngineParams<T> {
        &self.params
    }

    pub fn frame(&self) -> Option<&FrameOrigin<T>> {
        self.frame.as_ref()
    }

    pub fn field(&self) -> &ContaminationField<T> {
        &self.field
    }

    pub fn peers(&self) -> impl Iterator<Item = &PedestrianState<T>> {
        self.peers.values()
    }

    pub fn peer(&self, id: &str) -> Option<&PedestrianState<T>> {
        self.peers.get(id)
    }

    /// Validates `msg`, records it as the sender's latest state and drops a
    /// puff if the sender is unhealthy. A rejected message leaves the
    /// previous state in place.
    pub fn ingest(&mut self, msg: &StateMessage, now: u64) -> Result<&PedestrianState<T>, EngineError> {
        let frame = match self.frame {
            Some(f) => f,
            None => {
                let origin = GeoPoint::new(T::lit(msg.lat), T::lit(msg.lon)).map_err(|e| match e {
                    GeoError::LatOutOfRange(v) => ValidationError::LatOutOfRange(v),
                    GeoError::LonOutOfRange(v) => ValidationError::LonOutOfRange(v),
                    GeoError::NonFinite if !msg.lat.is_finite() => ValidationError::NonFinite("lat"),
                    GeoError::NonFinite => ValidationError::NonFinite("lon"),
                    other => ValidationError::OutsideFrame(other),
                })?;
                FrameOrigin::new(origin)?
            }
        };
        let last = self.peers.get(&msg.id).map(|s| s.stamp);
        let state = validate_state(msg, &frame, last)?;
        self.frame = Some(frame);
        if let Some(puff) = emit_puff(&state, &self.params, now) {
            self.field.push(puff);
        }
        let id = state.id.clone();
        self.peers.insert(id.clone(), state);
        Ok(&self.peers[&id])
    }

    /// Drops a pedestrian's live state. Its puffs keep decaying.
    pub fn remove(&mut self, id: &str) -> Option<PedestrianState<T>> {
        self.peers.remove(id)
    }

    pub fn prune(&mut self, now: u64) {
        self.field.prune(&self.params, now);
    }

    /// Red zones as seen by `viewer` (its own bubble and trail excluded).
    pub fn zones_for(&self, viewer: &str, now: u64) -> Vec<RedZone<T>> {
        active_red_zones(&self.field, self.peers.values(), &self.params, now, Some(viewer))
    }

    pub fn assess(&self, id: &str, now: u64) -> Option<Assessment<T>> {
        let state = self.peers.get(id)?;
        let zones = self.zones_for(id, now);
        let warning = classify(state, &zones, &self.params);
        let alert = alert_signal(&warning);
        Some(Assessment { state: state.clone(), warning, alert, zones })
    }

    /// Prunes expired puffs and classifies every live pedestrian, in id order.
    pub fn tick(&mut self, now: u64) -> Vec<Assessment<T>> {
        self.prune(now);
        self.peers.keys().filter_map(|id| self.assess(id, now)).collect()
    }

    /// Wire form of an assessment, zones converted back to lat/lon.
    pub fn advisory(&self, a: &Assessment<T>) -> AdvisoryMessage {
        let zones = match self.frame {
            Some(frame) => a
                .zones
                .iter()
                .filter_map(|z| {
                    let g = geodesy::to_geo(&z.area.center, &frame).ok()?;
                    Some(ZoneWire {
                        lat: g.lat.to_f64_lossy(),
                        lon: g.lon.to_f64_lossy(),
                        radius_m: z.area.radius.to_f64_lossy(),
                        level_pct: z.level.to_f64_lossy(),
                        kind: z.kind,
                    })
                })
                .collect(),
            None => Vec::new(),
        };
        AdvisoryMessage {
            id: a.state.id.clone(),
            state: a.warning.kind,
            ttc_s: a.warning.time_to_contact.map(Scalar::to_f64_lossy),
            zones,
        }
    }
}
