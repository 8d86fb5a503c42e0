//! Scripted scenarios: timed waypoint tracks in the local frame.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::{GeoError, GeoPoint, LocalPoint};
use crate::model::{EngineParams, ParamOverrides, ParamsError, SPEED_CAP_MPS};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("scenario has no tracks")]
    NoTracks,
    #[error("track {0:?} appears more than once")]
    DuplicateTrack(String),
    #[error("track has an empty id")]
    EmptyId,
    #[error("track {0:?} has no waypoints")]
    EmptyTrack(String),
    #[error("track {track:?} waypoint {index}: time not strictly increasing")]
    NonIncreasingTime { track: String, index: usize },
    #[error("track {track:?} waypoint {index}: non-finite or negative value")]
    BadWaypoint { track: String, index: usize },
    #[error("track {track:?} waypoint {index}: segment speed {speed:.2} m/s above cap")]
    TooFast { track: String, index: usize, speed: f64 },
    #[error("controlled track {0:?} must not have waypoints")]
    ControlledHasWaypoints(String),
    #[error("controlled id {0:?} has no track entry")]
    ControlledMissing(String),
    #[error("invalid origin: {0}")]
    Origin(#[from] GeoError),
    #[error(transparent)]
    Params(#[from] ParamsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub t_s: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Track {
    pub id: String,
    pub healthy: bool,
    #[serde(default)]
    pub waypoints: Vec<Waypoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioScript {
    pub name: String,
    pub origin: GeoPoint<f64>,
    #[serde(default)]
    pub params: ParamOverrides,
    pub tracks: Vec<Track>,
    #[serde(default)]
    pub controlled_id: Option<String>,
}

impl Track {
    pub fn start(&self) -> f64 {
        self.waypoints.first().map_or(f64::INFINITY, |w| w.t_s)
    }

    pub fn end(&self) -> f64 {
        self.waypoints.last().map_or(f64::NEG_INFINITY, |w| w.t_s)
    }

    /// Linearly interpolated position; held at the last waypoint after the
    /// track ends and `None` before it starts.
    pub fn position_at(&self, t: f64) -> Option<LocalPoint<f64>> {
        let first = self.waypoints.first()?;
        if t < first.t_s {
            return None;
        }
        let i = self.waypoints.partition_point(|w| w.t_s <= t);
        let a = &self.waypoints[i - 1];
        let Some(b) = self.waypoints.get(i) else {
            return Some(LocalPoint::new(a.x, a.y));
        };
        let u = (t - a.t_s) / (b.t_s - a.t_s);
        Some(LocalPoint::new(a.x + (b.x - a.x) * u, a.y + (b.y - a.y) * u))
    }

    /// Forward finite difference over one tick, `(vx, vy)` in m/s.
    pub fn velocity_at(&self, t: f64, dt: f64) -> Option<(f64, f64)> {
        let here = self.position_at(t)?;
        let next = self.position_at(t + dt)?;
        Some(((next.x - here.x) / dt, (next.y - here.y) / dt))
    }
}

impl ScenarioScript {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let script: ScenarioScript = serde_json::from_str(text)?;
        script.validate()?;
        Ok(script)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        GeoPoint::new(self.origin.lat, self.origin.lon)?;
        self.engine_params(None)?;
        if self.tracks.is_empty() {
            return Err(ScenarioError::NoTracks);
        }
        let mut seen = std::collections::HashSet::new();
        for track in &self.tracks {
            if track.id.is_empty() {
                return Err(ScenarioError::EmptyId);
            }
            if !seen.insert(track.id.as_str()) {
                return Err(ScenarioError::DuplicateTrack(track.id.clone()));
            }
            if self.controlled_id.as_deref() == Some(track.id.as_str()) {
                if !track.waypoints.is_empty() {
                    return Err(ScenarioError::ControlledHasWaypoints(track.id.clone()));
                }
                continue;
            }
            validate_waypoints(track)?;
        }
        if let Some(id) = &self.controlled_id {
            if !seen.contains(id.as_str()) {
                return Err(ScenarioError::ControlledMissing(id.clone()));
            }
        }
        Ok(())
    }

    /// Defaults, then the script's own overrides, then `extra`.
    pub fn engine_params(&self, extra: Option<&ParamOverrides>) -> Result<EngineParams<f64>, ParamsError> {
        let layered = match extra {
            Some(e) => self.params.merged(e),
            None => self.params.clone(),
        };
        let p = layered.apply(EngineParams::default());
        p.validate()?;
        Ok(p)
    }

    /// Frame origin, honoring an origin override in `extra`.
    pub fn frame_origin(&self, extra: Option<&ParamOverrides>) -> GeoPoint<f64> {
        extra.and_then(|e| e.origin).or(self.params.origin).unwrap_or(self.origin)
    }

    /// Latest waypoint time over all scripted tracks.
    pub fn duration(&self) -> f64 {
        self.scripted_tracks().map(Track::end).fold(0.0, f64::max)
    }

    /// Tracks driven by waypoints (everything but the controlled one).
    pub fn scripted_tracks(&self) -> impl Iterator<Item = &Track> {
        self.tracks.iter().filter(|t| self.controlled_id.as_deref() != Some(t.id.as_str()))
    }
}

fn validate_waypoints(track: &Track) -> Result<(), ScenarioError> {
    if track.waypoints.is_empty() {
        return Err(ScenarioError::EmptyTrack(track.id.clone()));
    }
    for (index, w) in track.waypoints.iter().enumerate() {
        if !(w.t_s.is_finite() && w.x.is_finite() && w.y.is_finite()) || w.t_s < 0.0 {
            return Err(ScenarioError::BadWaypoint { track: track.id.clone(), index });
        }
        if index == 0 {
            continue;
        }
        let prev = &track.waypoints[index - 1];
        if w.t_s <= prev.t_s {
            return Err(ScenarioError::NonIncreasingTime { track: track.id.clone(), index });
        }
        let speed = (w.x - prev.x).hypot(w.y - prev.y) / (w.t_s - prev.t_s);
        if speed > SPEED_CAP_MPS {
            return Err(ScenarioError::TooFast { track: track.id.clone(), index, speed });
        }
    }
    Ok(())
}

/// Reads and validates a `.scenario.json` file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioScript, ScenarioError> {
    ScenarioScript::from_json(&std::fs::read_to_string(path)?)
}
