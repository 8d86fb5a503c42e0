//! Pedestrian distancing engine.
//!
//! Pedestrians publish position, speed, heading and health once per second.
//! The engine draws a safety bubble around each of them, leaves a decaying
//! trail of contaminated circles behind unhealthy ones, projects every
//! pedestrian a few seconds ahead with a constant-velocity model and
//! classifies them as [`WarningKind::AreaSafe`], [`WarningKind::RedZonePredicted`]
//! or [`WarningKind::InRedZone`].
//!
//! The math is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix it to `f64`, which is what the relay and the replay harness use.

pub mod contamination;
pub mod engine;
pub mod geodesy;
pub mod harness;
pub mod model;
pub mod prediction;
pub mod protocol;
pub mod scalar;

pub use contamination::{active_red_zones, contamination_level, emit_puff, prune_expired, ZoneKind};
pub use engine::{Assessment, EngineError};
pub use geodesy::{heading_to_theta, to_geo, to_local};
pub use model::{bubble_of, circles_intersect, validate_state, DecayLaw, ParamOverrides, ValidationError};
pub use prediction::{alert_signal, classify, predict_position, velocity_components, AlertPattern, WarningKind};
pub use scalar::Scalar;

pub type GeoPoint = geodesy::GeoPoint<f64>;
pub type LocalPoint = geodesy::LocalPoint<f64>;
pub type FrameOrigin = geodesy::FrameOrigin<f64>;
pub type Circle = model::Circle<f64>;
pub type EngineParams = model::EngineParams<f64>;
pub type PedestrianState = model::PedestrianState<f64>;
pub type ContaminationPuff = contamination::ContaminationPuff<f64>;
pub type ContaminationField = contamination::ContaminationField<f64>;
pub type RedZone = contamination::RedZone<f64>;
pub type Velocity = prediction::Velocity<f64>;
pub type WarningState = prediction::WarningState<f64>;
pub type Engine = engine::Engine<f64>;

/// Single-precision variants, for embedded or memory-tight callers.
pub mod f32 {
    use super::{contamination, engine, geodesy, model, prediction};

    pub type GeoPoint = geodesy::GeoPoint<f32>;
    pub type LocalPoint = geodesy::LocalPoint<f32>;
    pub type Circle = model::Circle<f32>;
    pub type EngineParams = model::EngineParams<f32>;
    pub type PedestrianState = model::PedestrianState<f32>;
    pub type RedZone = contamination::RedZone<f32>;
    pub type WarningState = prediction::WarningState<f32>;
    pub type Engine = engine::Engine<f32>;
}
