//! Constant-velocity look-ahead and the three-state warning machine.

use serde::{Deserialize, Serialize};

use crate::contamination::RedZone;
use crate::geodesy::LocalPoint;
use crate::model::{bubble_of, circles_intersect, Circle, EngineParams, PedestrianState};
use crate::scalar::Scalar;

/// Velocity in the local frame, m/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Velocity<T> {
    pub vx: T,
    pub vy: T,
}

impl<T: Scalar> Velocity<T> {
    pub fn magnitude(&self) -> T {
        self.vx.hypot(self.vy)
    }
}

pub fn velocity_components<T: Scalar>(speed: T, theta: T) -> Velocity<T> {
    Velocity { vx: speed * theta.cos(), vy: speed * theta.sin() }
}

/// Where `s` will be after `dt` seconds if speed and heading hold.
///
/// # Panics
///
/// Panics if `dt` is negative or NaN.
pub fn predict_position<T: Scalar>(s: &PedestrianState<T>, dt: T) -> LocalPoint<T> {
    assert!(dt >= T::zero(), "prediction interval must be non-negative");
    if dt == T::zero() {
        return s.position;
    }
    let v = velocity_components(s.speed, s.theta);
    s.position.offset(v.vx * dt, v.vy * dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WarningKind {
    AreaSafe,
    RedZonePredicted,
    InRedZone,
}

impl WarningKind {
    pub fn as_str(self) -> &'static str {
        match self {
            WarningKind::AreaSafe => "AreaSafe",
            WarningKind::RedZonePredicted => "RedZonePredicted",
            WarningKind::InRedZone => "InRedZone",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "AreaSafe" => Some(WarningKind::AreaSafe),
            "RedZonePredicted" => Some(WarningKind::RedZonePredicted),
            "InRedZone" => Some(WarningKind::InRedZone),
            _ => None,
        }
    }
}

/// Classification result. `cause` is set for every state but `AreaSafe`;
/// `time_to_contact` only for `RedZonePredicted`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarningState<T> {
    pub kind: WarningKind,
    pub cause: Option<RedZone<T>>,
    pub time_to_contact: Option<T>,
}

impl<T: Scalar> WarningState<T> {
    pub fn safe() -> Self {
        WarningState { kind: WarningKind::AreaSafe, cause: None, time_to_contact: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlertPattern {
    None,
    Intermittent,
    Continuous,
}

impl AlertPattern {
    pub fn as_str(self) -> &'static str {
        match self {
            AlertPattern::None => "None",
            AlertPattern::Intermittent => "Intermittent",
            AlertPattern::Continuous => "Continuous",
        }
    }
}

pub fn alert_signal<T>(w: &WarningState<T>) -> AlertPattern {
    match w.kind {
        WarningKind::AreaSafe => AlertPattern::None,
        WarningKind::RedZonePredicted => AlertPattern::Intermittent,
        WarningKind::InRedZone => AlertPattern::Continuous,
    }
}

/// Sample times `step, 2·step, …` strictly below `horizon`, then `horizon`.
pub fn horizon_samples<T: Scalar>(p: &EngineParams<T>) -> Vec<T> {
    let eps = p.horizon_step * T::lit(1e-9);
    let mut out = Vec::new();
    let mut k = 1usize;
    loop {
        let dt = p.horizon_step * T::from_usize(k).unwrap_or_else(T::infinity);
        if dt >= p.horizon - eps {
            break;
        }
        out.push(dt);
        k += 1;
    }
    out.push(p.horizon);
    out
}

/// Closest intersecting zone to `bubble`; ties go to the earlier zone.
fn nearest_hit<'z, T: Scalar>(bubble: &Circle<T>, zones: &'z [RedZone<T>]) -> Option<&'z RedZone<T>> {
    let mut best: Option<(T, &RedZone<T>)> = None;
    for z in zones.iter().filter(|z| circles_intersect(bubble, &z.area)) {
        let d = bubble.center.distance(&z.area.center);
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, z));
        }
    }
    best.map(|(_, z)| z)
}

/// Places `s` in one of the three warning states against `zones`.
///
/// A current overlap wins over any prediction. Otherwise the bubble is swept
/// along the constant-velocity path at the horizon samples and the first
/// sampled contact is reported.
pub fn classify<T: Scalar>(s: &PedestrianState<T>, zones: &[RedZone<T>], p: &EngineParams<T>) -> WarningState<T> {
    if zones.is_empty() {
        return WarningState::safe();
    }
    let now = bubble_of(s, p);
    if let Some(z) = nearest_hit(&now, zones) {
        return WarningState { kind: WarningKind::InRedZone, cause: Some(z.clone()), time_to_contact: None };
    }
    for dt in horizon_samples(p) {
        let ahead = Circle { center: predict_position(s, dt), radius: p.bubble_radius };
        if let Some(z) = nearest_hit(&ahead, zones) {
            return WarningState {
                kind: WarningKind::RedZonePredicted,
                cause: Some(z.clone()),
                time_to_contact: Some(dt),
            };
        }
    }
    WarningState::safe()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contamination::ZoneKind;
    use crate::geodesy::GeoPoint;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn walker(x: f64, y: f64, speed: f64, theta: f64) -> PedestrianState<f64> {
        PedestrianState {
            id: "me".into(),
            position: LocalPoint::new(x, y),
            geo: GeoPoint { lat: 0.0, lon: 0.0 },
            speed,
            theta,
            healthy: true,
            stamp: 0,
        }
    }

    fn zone(x: f64, y: f64) -> RedZone<f64> {
        RedZone {
            area: Circle { center: LocalPoint::new(x, y), radius: 9.144 },
            level: 100.0,
            kind: ZoneKind::Trail,
            source: "u".into(),
        }
    }

    #[test]
    fn velocity_examples() {
        assert_eq!(velocity_components(0.0, 1.234), Velocity { vx: 0.0, vy: 0.0 });
        let v = velocity_components(2.0, FRAC_PI_2);
        assert!(v.vx.abs() < 1e-15 && (v.vy - 2.0).abs() < 1e-15);
        let v = velocity_components(1.5, FRAC_PI_4);
        assert!((v.vx - 1.0607).abs() < 1e-4 && (v.vy - 1.0607).abs() < 1e-4);
    }

    #[test]
    fn prediction_examples() {
        let s = walker(3.0, 4.0, 1.2, 0.7);
        assert_eq!(predict_position(&s, 0.0), s.position);
        let p = predict_position(&walker(0.0, 0.0, 2.0, FRAC_PI_2), 3.0);
        assert!(p.x.abs() < 1e-12 && (p.y - 6.0).abs() < 1e-12);
        let p = predict_position(&walker(10.0, -5.0, 1.5, PI), 2.0);
        assert!((p.x - 7.0).abs() < 1e-12 && (p.y + 5.0).abs() < 1e-12);
    }

    #[test]
    #[should_panic]
    fn negative_interval_panics() {
        predict_position(&walker(0.0, 0.0, 1.0, 0.0), -0.5);
    }

    #[test]
    fn samples_cover_horizon() {
        let p = EngineParams::<f64>::default();
        assert_eq!(horizon_samples(&p), vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
        let odd = EngineParams::<f64> { horizon: 1.2, horizon_step: 0.5, ..p };
        assert_eq!(horizon_samples(&odd), vec![0.5, 1.0, 1.2]);
        let one = EngineParams::<f64> { horizon: 0.5, horizon_step: 0.5, ..p };
        assert_eq!(horizon_samples(&one), vec![0.5]);
    }

    #[test]
    fn no_zones_is_safe() {
        let w = classify(&walker(0.0, 0.0, 1.4, 0.0), &[], &EngineParams::default());
        assert_eq!(w, WarningState::safe());
        assert_eq!(alert_signal(&w), AlertPattern::None);
    }

    #[test]
    fn standing_inside_zone() {
        let w = classify(&walker(0.0, 0.0, 0.0, 0.0), &[zone(10.0, 0.0)], &EngineParams::default());
        assert_eq!(w.kind, WarningKind::InRedZone);
        assert!(w.cause.is_some());
        assert_eq!(w.time_to_contact, None);
        assert_eq!(alert_signal(&w), AlertPattern::Continuous);
    }

    #[test]
    fn approach_reports_first_sampled_contact() {
        // continuous contact at (24 - 18.288) / 2 = 2.856 s, first sample at or after is 3.0
        let w = classify(&walker(0.0, 0.0, 2.0, 0.0), &[zone(24.0, 0.0)], &EngineParams::default());
        assert_eq!(w.kind, WarningKind::RedZonePredicted);
        assert_eq!(w.time_to_contact, Some(3.0));
        assert_eq!(alert_signal(&w), AlertPattern::Intermittent);
    }

    #[test]
    fn current_overlap_dominates_prediction() {
        let zones = [zone(25.0, 0.0), zone(0.0, 15.0)];
        let w = classify(&walker(0.0, 0.0, 2.0, 0.0), &zones, &EngineParams::default());
        assert_eq!(w.kind, WarningKind::InRedZone);
        assert_eq!(w.cause.unwrap().area.center, LocalPoint::new(0.0, 15.0));
    }

    #[test]
    fn cause_tie_breaks() {
        let p = EngineParams::default();
        // nearer zone wins
        let zones = [zone(0.0, 17.0), zone(0.0, 12.0)];
        let w = classify(&walker(0.0, 0.0, 0.0, 0.0), &zones, &p);
        assert_eq!(w.cause.unwrap().area.center, LocalPoint::new(0.0, 12.0));
        // equal distance: emission order
        let mut a = zone(0.0, 12.0);
        a.source = "first".into();
        let mut b = zone(0.0, -12.0);
        b.source = "second".into();
        let w = classify(&walker(0.0, 0.0, 0.0, 0.0), &[a, b], &p);
        assert_eq!(w.cause.unwrap().source, "first");
        // earliest sample wins over a nearer but later contact
        let zones = [zone(40.0, 0.0), zone(21.0, 0.0)];
        let w = classify(&walker(0.0, 0.0, 6.0, 0.0), &zones, &p);
        assert_eq!(w.time_to_contact, Some(0.5));
        assert_eq!(w.cause.unwrap().area.center, LocalPoint::new(21.0, 0.0));
    }

    #[test]
    fn moving_away_is_safe() {
        let w = classify(&walker(0.0, 0.0, 1.4, PI), &[zone(20.0, 0.0)], &EngineParams::default());
        assert_eq!(w.kind, WarningKind::AreaSafe);
    }
}
