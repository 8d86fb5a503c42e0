//! Deterministic tick loop on a logical clock.

use std::collections::HashMap;

use thiserror::Error;

use crate::engine::{Engine, EngineError};
use crate::geodesy::{self, FrameOrigin, GeoError};
use crate::harness::scenario::{ScenarioError, ScenarioScript};
use crate::harness::trace::{PuffFrame, Trace, TraceEvent};
use crate::model::{EngineParams, ParamOverrides, ParamsError};
use crate::protocol::relay::RelayError;
use crate::protocol::wire::StateMessage;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("frame: {0}")]
    Frame(#[from] GeoError),
    #[error("relay: {0}")]
    Relay(#[from] RelayError),
    #[error("track {0:?} is reserved for live input and cannot be replayed")]
    Controlled(String),
}

/// Turns scripted tracks into the state messages their phones would send.
#[derive(Debug, Clone)]
pub struct TrackDriver {
    script: ScenarioScript,
    frame: FrameOrigin<f64>,
    period_s: f64,
    headings: HashMap<String, f64>,
}

impl TrackDriver {
    pub fn new(script: ScenarioScript, extra: Option<&ParamOverrides>) -> Result<Self, HarnessError> {
        let params = script.engine_params(extra)?;
        let frame = FrameOrigin::new(script.frame_origin(extra))?;
        Ok(TrackDriver { script, frame, period_s: params.update_period, headings: HashMap::new() })
    }

    pub fn script(&self) -> &ScenarioScript {
        &self.script
    }

    pub fn frame(&self) -> &FrameOrigin<f64> {
        &self.frame
    }

    /// Canonical state messages for every scripted track present at tick
    /// time `t_ms`, in script order. Speed and heading come from the
    /// displacement over the coming tick; a stopped track keeps its last
    /// heading.
    pub fn messages_at(&mut self, t_ms: u64) -> Result<Vec<StateMessage>, HarnessError> {
        let t = t_ms as f64 / 1000.0;
        let mut out = Vec::new();
        for track in self.script.scripted_tracks() {
            let Some(pos) = track.position_at(t) else { continue };
            let (vx, vy) = track.velocity_at(t, self.period_s).unwrap_or((0.0, 0.0));
            let mut speed = vx.hypot(vy);
            let heading = if speed > 1e-9 {
                let h = geodesy::theta_to_heading(vy.atan2(vx));
                self.headings.insert(track.id.clone(), h);
                h
            } else {
                speed = 0.0;
                self.headings.get(&track.id).copied().unwrap_or(0.0)
            };
            let geo = geodesy::to_geo(&pos, &self.frame)?;
            let msg = StateMessage {
                id: track.id.clone(),
                lat: geo.lat,
                lon: geo.lon,
                speed_mps: speed,
                heading_deg: heading,
                healthy: track.healthy,
                t_ms,
            };
            out.push(msg.canonical());
        }
        Ok(out)
    }
}

pub struct Simulation {
    driver: TrackDriver,
    engine: Engine<f64>,
    params: EngineParams<f64>,
    tick: u64,
    trace: Trace,
}

impl Simulation {
    pub fn new(script: ScenarioScript, extra: Option<&ParamOverrides>) -> Result<Self, HarnessError> {
        script.validate()?;
        let params = script.engine_params(extra)?;
        let driver = TrackDriver::new(script, extra)?;
        let engine = Engine::new(params, Some(driver.frame().origin))?;
        Ok(Simulation { driver, engine, params, tick: 0, trace: Trace::default() })
    }

    pub fn params(&self) -> &EngineParams<f64> {
        &self.params
    }

    pub fn engine(&self) -> &Engine<f64> {
        &self.engine
    }

    /// Logical time of the next step, ms.
    pub fn now_ms(&self) -> u64 {
        tick_ms(self.tick, self.params.update_period)
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }

    /// Feeds every present track's update, then prunes and classifies, and
    /// advances the clock one update period.
    pub fn step(&mut self) -> Result<Vec<TraceEvent>, HarnessError> {
        let now = self.now_ms();
        let t_s = now as f64 / 1000.0;
        for msg in self.driver.messages_at(now)? {
            self.engine.ingest(&msg, now)?;
        }
        let events: Vec<TraceEvent> = self
            .engine
            .tick(now)
            .into_iter()
            .map(|a| TraceEvent {
                t_s,
                id: a.state.id.clone(),
                position: a.state.position,
                zones_active: a.zones.len(),
                alert: a.alert,
                warning: a.warning,
            })
            .collect();
        for puff in &self.engine.field().puffs {
            let level_pct = crate::contamination::contamination_level(puff, &self.params, now).unwrap_or(0.0);
            self.trace.puffs.push(PuffFrame {
                t_s,
                emitter: puff.emitter.clone(),
                center: puff.area.center,
                radius: puff.area.radius,
                level_pct,
            });
        }
        self.trace.events.extend(events.iter().cloned());
        self.tick += 1;
        Ok(events)
    }
}

pub fn tick_ms(tick: u64, period_s: f64) -> u64 {
    (tick as f64 * period_s * 1000.0).round() as u64
}

/// Number of ticks covering `[0, duration]`.
pub fn tick_count(duration_s: f64, period_s: f64) -> u64 {
    (duration_s / period_s + 1e-9).floor() as u64 + 1
}

/// Replays a script from t = 0 through its last waypoint.
pub fn run(script: &ScenarioScript, extra: Option<&ParamOverrides>) -> Result<Trace, HarnessError> {
    if let Some(id) = &script.controlled_id {
        return Err(HarnessError::Controlled(id.clone()));
    }
    let mut sim = Simulation::new(script.clone(), extra)?;
    for _ in 0..tick_count(script.duration(), sim.params().update_period) {
        sim.step()?;
    }
    Ok(sim.into_trace())
}
