//! Pedestrian state, safety bubbles and engine parameters.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::{self, FrameOrigin, GeoError, GeoPoint, LocalPoint};
use crate::protocol::wire::StateMessage;
use crate::scalar::Scalar;

/// 30 ft.
pub const DEFAULT_BUBBLE_RADIUS_M: f64 = 9.144;
/// 6 ft, the smallest bubble the engine accepts.
pub const MIN_BUBBLE_RADIUS_M: f64 = 1.8288;
/// Three hours.
pub const DEFAULT_AIRBORNE_S: f64 = 10_800.0;
/// Airborne time used for on-screen demonstrations.
pub const DEMO_AIRBORNE_S: f64 = 6.0;
/// Reported speeds above this are treated as GPS glitches.
pub const SPEED_CAP_MPS: f64 = 15.0;

/// Decay law applied to contamination puffs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayLaw {
    /// `C(t) = C_start · (1 − t / t_airborne)`, reaching zero at `t_airborne`.
    #[default]
    LinearToZero,
    /// `C(t) = C_start − 100 / (C_start · t_airborne) · t`. With
    /// `C_start = 100` it only reaches zero at `100 · t_airborne`.
    InverseStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineParams<T> {
    /// Safety bubble radius, meters.
    pub bubble_radius: T,
    /// Seconds a puff stays contaminated.
    pub t_airborne: T,
    /// Initial contamination percentage of a fresh puff.
    pub c_start: T,
    /// Prediction look-ahead, seconds.
    pub horizon: T,
    /// Spacing of prediction samples inside the horizon, seconds.
    pub horizon_step: T,
    /// Seconds between state updates (one tick).
    pub update_period: T,
    /// Seconds of silence before a session is evicted.
    pub stale_timeout: T,
    pub decay: DecayLaw,
}

impl<T: Scalar> Default for EngineParams<T> {
    fn default() -> Self {
        EngineParams {
            bubble_radius: T::lit(DEFAULT_BUBBLE_RADIUS_M),
            t_airborne: T::lit(DEFAULT_AIRBORNE_S),
            c_start: T::lit(100.0),
            horizon: T::lit(3.0),
            horizon_step: T::lit(0.5),
            update_period: T::lit(1.0),
            stale_timeout: T::lit(5.0),
            decay: DecayLaw::LinearToZero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamsError {
    #[error("parameter {0} must be positive and finite")]
    NotPositive(&'static str),
    #[error("c_start must lie in (0, 100]")]
    CStartRange,
    #[error("horizon_step must not exceed horizon")]
    StepExceedsHorizon,
    #[error("bubble_radius below the 1.8288 m floor")]
    BubbleTooSmall,
}

impl<T: Scalar> EngineParams<T> {
    /// Defaults with the six-second airborne time used for demonstrations.
    pub fn demo() -> Self {
        EngineParams { t_airborne: T::lit(DEMO_AIRBORNE_S), ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        let positive = [
            ("bubble_radius", self.bubble_radius),
            ("t_airborne", self.t_airborne),
            ("c_start", self.c_start),
            ("horizon", self.horizon),
            ("horizon_step", self.horizon_step),
            ("update_period", self.update_period),
            ("stale_timeout", self.stale_timeout),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > T::zero()) {
                return Err(ParamsError::NotPositive(name));
            }
        }
        if self.c_start > T::lit(100.0) {
            return Err(ParamsError::CStartRange);
        }
        if self.horizon_step > self.horizon {
            return Err(ParamsError::StepExceedsHorizon);
        }
        if self.bubble_radius < T::lit(MIN_BUBBLE_RADIUS_M) {
            return Err(ParamsError::BubbleTooSmall);
        }
        Ok(())
    }

    pub fn update_period_ms(&self) -> u64 {
        (self.update_period.to_f64_lossy() * 1000.0).round() as u64
    }

    pub fn stale_timeout_ms(&self) -> u64 {
        (self.stale_timeout.to_f64_lossy() * 1000.0).round() as u64
    }
}

/// Partial parameter set read from a params file or a scenario; unset fields
/// fall through to whatever they are applied on top of.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamOverrides {
    pub bubble_radius: Option<f64>,
    pub t_airborne: Option<f64>,
    pub c_start: Option<f64>,
    pub horizon: Option<f64>,
    pub horizon_step: Option<f64>,
    pub update_period: Option<f64>,
    pub stale_timeout: Option<f64>,
    pub decay: Option<DecayLaw>,
    /// Fixes the local frame instead of taking the first received position.
    pub origin: Option<GeoPoint<f64>>,
}

impl ParamOverrides {
    pub fn apply(&self, base: EngineParams<f64>) -> EngineParams<f64> {
        EngineParams {
            bubble_radius: self.bubble_radius.unwrap_or(base.bubble_radius),
            t_airborne: self.t_airborne.unwrap_or(base.t_airborne),
            c_start: self.c_start.unwrap_or(base.c_start),
            horizon: self.horizon.unwrap_or(base.horizon),
            horizon_step: self.horizon_step.unwrap_or(base.horizon_step),
            update_period: self.update_period.unwrap_or(base.update_period),
            stale_timeout: self.stale_timeout.unwrap_or(base.stale_timeout),
            decay: self.decay.unwrap_or(base.decay),
        }
    }

    /// Layers `other` on top of `self`.
    pub fn merged(&self, other: &ParamOverrides) -> ParamOverrides {
        ParamOverrides {
            bubble_radius: other.bubble_radius.or(self.bubble_radius),
            t_airborne: other.t_airborne.or(self.t_airborne),
            c_start: other.c_start.or(self.c_start),
            horizon: other.horizon.or(self.horizon),
            horizon_step: other.horizon_step.or(self.horizon_step),
            update_period: other.update_period.or(self.update_period),
            stale_timeout: other.stale_timeout.or(self.stale_timeout),
            decay: other.decay.or(self.decay),
            origin: other.origin.or(self.origin),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle<T> {
    pub center: LocalPoint<T>,
    pub radius: T,
}

impl<T: Scalar> Circle<T> {
    /// Returns `None` unless `radius` is positive and finite.
    pub fn new(center: LocalPoint<T>, radius: T) -> Option<Self> {
        (radius.is_finite() && radius > T::zero()).then_some(Circle { center, radius })
    }

    pub fn intersects(&self, other: &Circle<T>) -> bool {
        circles_intersect(self, other)
    }
}

/// True when the circles overlap or touch.
pub fn circles_intersect<T: Scalar>(a: &Circle<T>, b: &Circle<T>) -> bool {
    a.center.distance(&b.center) <= a.radius + b.radius
}

/// One pedestrian's latest kinematic and health snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedestrianState<T> {
    pub id: String,
    pub position: LocalPoint<T>,
    pub geo: GeoPoint<T>,
    /// m/s, in [0, SPEED_CAP_MPS].
    pub speed: T,
    /// Radians counterclockwise from East, in (-π, π].
    pub theta: T,
    pub healthy: bool,
    /// Milliseconds since the session epoch.
    pub stamp: u64,
}

impl<T: Scalar> PedestrianState<T> {
    /// Wire form of this state.
    pub fn to_message(&self) -> StateMessage {
        StateMessage {
            id: self.id.clone(),
            lat: self.geo.lat.to_f64_lossy(),
            lon: self.geo.lon.to_f64_lossy(),
            speed_mps: self.speed.to_f64_lossy(),
            heading_deg: geodesy::theta_to_heading(self.theta).to_f64_lossy(),
            healthy: self.healthy,
            t_ms: self.stamp,
        }
    }
}

pub fn bubble_of<T: Scalar>(s: &PedestrianState<T>, p: &EngineParams<T>) -> Circle<T> {
    Circle { center: s.position, radius: p.bubble_radius }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("empty pedestrian id")]
    EmptyId,
    #[error("non-finite value in field {0}")]
    NonFinite(&'static str),
    #[error("latitude {0} outside [-90, 90]")]
    LatOutOfRange(f64),
    #[error("longitude {0} outside [-180, 180]")]
    LonOutOfRange(f64),
    #[error("negative speed {0}")]
    NegativeSpeed(f64),
    #[error("speed {0} m/s above the {SPEED_CAP_MPS} m/s cap")]
    SpeedAboveCap(f64),
    #[error("heading {0} outside [0, 360)")]
    HeadingOutOfRange(f64),
    #[error("stamp {stamp} older than last accepted {last}")]
    OutOfOrder { stamp: u64, last: u64 },
    #[error("position too far from frame origin: {0}")]
    OutsideFrame(GeoError),
}

/// Range-checks a decoded message and lifts it into the local frame.
///
/// `last_stamp` is the stamp of the previously accepted state for the same
/// id; an older stamp is rejected.
pub fn validate_state<T: Scalar>(
    raw: &StateMessage,
    frame: &FrameOrigin<T>,
    last_stamp: Option<u64>,
) -> Result<PedestrianState<T>, ValidationError> {
    if raw.id.is_empty() {
        return Err(ValidationError::EmptyId);
    }
    for (name, v) in
        [("lat", raw.lat), ("lon", raw.lon), ("speed_mps", raw.speed_mps), ("heading_deg", raw.heading_deg)]
    {
        if !v.is_finite() {
            return Err(ValidationError::NonFinite(name));
        }
    }
    if raw.lat.abs() > 90.0 {
        return Err(ValidationError::LatOutOfRange(raw.lat));
    }
    if raw.lon.abs() > 180.0 {
        return Err(ValidationError::LonOutOfRange(raw.lon));
    }
    if raw.speed_mps < 0.0 {
        return Err(ValidationError::NegativeSpeed(raw.speed_mps));
    }
    if raw.speed_mps > SPEED_CAP_MPS {
        return Err(ValidationError::SpeedAboveCap(raw.speed_mps));
    }
    if !(0.0..360.0).contains(&raw.heading_deg) {
        return Err(ValidationError::HeadingOutOfRange(raw.heading_deg));
    }
    if let Some(last) = last_stamp {
        if raw.t_ms < last {
            return Err(ValidationError::OutOfOrder { stamp: raw.t_ms, last });
        }
    }

    let geo = GeoPoint { lat: T::lit(raw.lat), lon: T::lit(raw.lon) };
    let position = geodesy::to_local(&geo, frame).map_err(ValidationError::OutsideFrame)?;
    let theta =
        geodesy::heading_to_theta(T::lit(raw.heading_deg)).map_err(|_| ValidationError::NonFinite("heading_deg"))?;

    Ok(PedestrianState {
        id: raw.id.clone(),
        position,
        geo,
        speed: T::lit(raw.speed_mps),
        theta,
        healthy: raw.healthy,
        stamp: raw.t_ms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame() -> FrameOrigin<f64> {
        FrameOrigin::new(GeoPoint::new(40.0, -83.0).unwrap()).unwrap()
    }

    fn msg() -> StateMessage {
        StateMessage {
            id: "ped-1".into(),
            lat: 40.0001,
            lon: -83.0001,
            speed_mps: 1.4,
            heading_deg: 225.0,
            healthy: true,
            t_ms: 1000,
        }
    }

    fn state_at(x: f64, y: f64) -> PedestrianState<f64> {
        PedestrianState {
            id: "a".into(),
            position: LocalPoint::new(x, y),
            geo: GeoPoint { lat: 0.0, lon: 0.0 },
            speed: 0.0,
            theta: 0.0,
            healthy: true,
            stamp: 0,
        }
    }

    #[test]
    fn default_bubble_is_thirty_feet() {
        let p = EngineParams::<f64>::default();
        assert!((p.bubble_radius - 30.0 * 0.3048).abs() < 1e-12);
        let c = bubble_of(&state_at(0.0, 0.0), &p);
        assert_eq!(c.center, LocalPoint::new(0.0, 0.0));
        assert_eq!(c.radius, 9.144);
        let c = bubble_of(&state_at(5.0, -3.0), &p);
        assert_eq!(c.center, LocalPoint::new(5.0, -3.0));

        let small = EngineParams { bubble_radius: 1.8288, ..p };
        assert!((small.bubble_radius - 6.0 * 0.3048).abs() < 1e-12);
        assert!(small.validate().is_ok());
        assert_eq!(bubble_of(&state_at(1.0, 1.0), &small).radius, 1.8288);
    }

    #[test]
    fn params_validation() {
        assert!(EngineParams::<f64>::default().validate().is_ok());
        assert!(EngineParams::<f64>::demo().validate().is_ok());
        let p = EngineParams::<f64> { horizon_step: 4.0, ..Default::default() };
        assert_eq!(p.validate(), Err(ParamsError::StepExceedsHorizon));
        let p = EngineParams::<f64> { bubble_radius: 1.0, ..Default::default() };
        assert_eq!(p.validate(), Err(ParamsError::BubbleTooSmall));
        let p = EngineParams::<f64> { c_start: 120.0, ..Default::default() };
        assert_eq!(p.validate(), Err(ParamsError::CStartRange));
        let p = EngineParams::<f64> { t_airborne: 0.0, ..Default::default() };
        assert_eq!(p.validate(), Err(ParamsError::NotPositive("t_airborne")));
    }

    #[test]
    fn overrides_layer() {
        let base = ParamOverrides { t_airborne: Some(6.0), horizon: Some(2.0), ..Default::default() };
        let top = ParamOverrides { horizon: Some(3.0), ..Default::default() };
        let p = base.merged(&top).apply(EngineParams::default());
        assert_eq!(p.t_airborne, 6.0);
        assert_eq!(p.horizon, 3.0);
        assert_eq!(p.bubble_radius, 9.144);

        let parsed: ParamOverrides = serde_json::from_str(r#"{"t_airborne": 6, "decay": "inverse_start"}"#).unwrap();
        assert_eq!(parsed.decay, Some(DecayLaw::InverseStart));
        assert!(serde_json::from_str::<ParamOverrides>(r#"{"t_airbone": 6}"#).is_err());
    }

    #[test]
    fn intersection_boundaries() {
        let r = 9.144;
        let a = Circle::new(LocalPoint::new(0.0, 0.0), r).unwrap();
        let b = Circle::new(LocalPoint::new(18.0, 0.0), r).unwrap();
        assert!(circles_intersect(&a, &b));
        let c = Circle::new(LocalPoint::new(18.289, 0.0), r).unwrap();
        assert!(!circles_intersect(&a, &c));
        assert!(circles_intersect(&a, &a));
        // tangency
        let t = Circle::new(LocalPoint::new(0.0, 4.0), 1.0).unwrap();
        let u = Circle::new(LocalPoint::new(0.0, 1.0), 2.0).unwrap();
        assert!(circles_intersect(&t, &u));
        assert!(Circle::new(LocalPoint::new(0.0, 0.0), 0.0).is_none());
    }

    #[test]
    fn validation_errors_are_named() {
        let f = frame();
        let m = StateMessage { speed_mps: -1.0, ..msg() };
        assert_eq!(validate_state(&m, &f, None), Err(ValidationError::NegativeSpeed(-1.0)));
        let m = StateMessage { lat: 91.0, ..msg() };
        assert_eq!(validate_state(&m, &f, None), Err(ValidationError::LatOutOfRange(91.0)));
        let m = StateMessage { lon: 180.5, ..msg() };
        assert_eq!(validate_state(&m, &f, None), Err(ValidationError::LonOutOfRange(180.5)));
        let m = StateMessage { speed_mps: 15.5, ..msg() };
        assert_eq!(validate_state(&m, &f, None), Err(ValidationError::SpeedAboveCap(15.5)));
        let m = StateMessage { heading_deg: 360.0, ..msg() };
        assert_eq!(validate_state(&m, &f, None), Err(ValidationError::HeadingOutOfRange(360.0)));
        let m = StateMessage { id: String::new(), ..msg() };
        assert_eq!(validate_state(&m, &f, None), Err(ValidationError::EmptyId));
        let m = StateMessage { lat: f64::NAN, ..msg() };
        assert_eq!(validate_state(&m, &f, None), Err(ValidationError::NonFinite("lat")));
        assert_eq!(
            validate_state(&msg(), &f, Some(2000)),
            Err(ValidationError::OutOfOrder { stamp: 1000, last: 2000 })
        );
        let m = StateMessage { lat: 42.0, ..msg() };
        assert!(matches!(validate_state(&m, &f, None), Err(ValidationError::OutsideFrame(_))));
    }

    #[test]
    fn equal_stamp_is_accepted() {
        assert!(validate_state(&msg(), &frame(), Some(1000)).is_ok());
    }

    #[test]
    fn well_formed_message_lifts_into_frame() {
        let f = frame();
        let s = validate_state(&msg(), &f, None).unwrap();
        assert_eq!(s.theta, geodesy::heading_to_theta(225.0).unwrap());
        assert_eq!(s.position, geodesy::to_local(&GeoPoint::new(40.0001, -83.0001).unwrap(), &f).unwrap());
        assert_eq!(s.speed, 1.4);
        assert!(s.healthy);
        assert_eq!(s.stamp, 1000);
        assert_eq!(s.id, "ped-1");
    }
}
