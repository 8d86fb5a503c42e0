use proptest::prelude::*;
use std::f64::consts::PI;

use safewalk_core::contamination::{
    active_red_zones, contamination_level, prune_expired, ContaminationField, ContaminationPuff, RedZone, ZoneKind,
};
use safewalk_core::geodesy::{heading_to_theta, to_geo, to_local, FrameOrigin, GeoPoint, LocalPoint};
use safewalk_core::model::{circles_intersect, validate_state, Circle, EngineParams, PedestrianState};
use safewalk_core::prediction::{classify, WarningKind};
use safewalk_core::protocol::StateMessage;

fn params() -> EngineParams<f64> {
    EngineParams::demo()
}

fn circle() -> impl Strategy<Value = Circle<f64>> {
    (-100.0..100.0f64, -100.0..100.0f64, 0.1..20.0f64)
        .prop_map(|(x, y, r)| Circle { center: LocalPoint::new(x, y), radius: r })
}

fn puff(born: u64, x: f64) -> ContaminationPuff<f64> {
    ContaminationPuff {
        area: Circle { center: LocalPoint::new(x, 0.0), radius: 9.144 },
        born,
        c_start: 100.0,
        emitter: "u".into(),
    }
}

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

proptest! {
    #[test]
    fn intersection_is_symmetric(a in circle(), b in circle()) {
        prop_assert_eq!(circles_intersect(&a, &b), circles_intersect(&b, &a));
    }

    #[test]
    fn intersection_is_translation_invariant(a in circle(), b in circle(), dx in -50.0..50.0f64, dy in -50.0..50.0f64) {
        // shifting perturbs the last bits, so stay clear of tangency
        let gap = a.center.distance(&b.center) - (a.radius + b.radius);
        prop_assume!(gap.abs() > 1e-6);
        let shift = |c: &Circle<f64>| Circle { center: c.center.offset(dx, dy), ..*c };
        prop_assert_eq!(circles_intersect(&a, &b), circles_intersect(&shift(&a), &shift(&b)));
    }

    #[test]
    fn concentric_circles_intersect(a in circle(), r in 0.1..20.0f64) {
        let b = Circle { center: a.center, radius: r };
        prop_assert!(circles_intersect(&a, &b));
    }

    #[test]
    fn decay_is_non_increasing(t1 in 0u64..20_000, t2 in 0u64..20_000) {
        let p = params();
        let pf = puff(0, 0.0);
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        let a = contamination_level(&pf, &p, lo).unwrap();
        let b = contamination_level(&pf, &p, hi).unwrap();
        prop_assert!(b <= a);
        prop_assert!((0.0..=100.0).contains(&a));
    }

    #[test]
    fn pruning_twice_changes_nothing(births in prop::collection::vec(0u64..20_000, 0..30), now in 0u64..30_000) {
        let p = params();
        let mut f = ContaminationField::new();
        for (i, b) in births.iter().enumerate() {
            f.push(puff(*b, i as f64));
        }
        let once = prune_expired(f, &p, now);
        let twice = prune_expired(once.clone(), &p, now);
        prop_assert_eq!(&once, &twice);
        for pf in &once.puffs {
            prop_assert!(pf.born > now || contamination_level(pf, &p, now).unwrap() > 0.0);
        }
    }

    #[test]
    fn pruning_does_not_change_zones(births in prop::collection::vec(0u64..20_000, 0..30), now in 0u64..30_000) {
        let p = params();
        let mut f = ContaminationField::new();
        for (i, b) in births.iter().enumerate() {
            f.push(puff((*b).min(now), i as f64));
        }
        let none: [&PedestrianState<f64>; 0] = [];
        let before = active_red_zones(&f, none, &p, now, None);
        let after = active_red_zones(&prune_expired(f, &p, now), none, &p, now, None);
        prop_assert_eq!(before, after);
    }

    #[test]
    fn removing_zones_never_worsens_the_warning(
        x in -30.0..30.0f64, y in -30.0..30.0f64, speed in 0.0..3.0f64, theta in -PI..PI,
        centers in prop::collection::vec((-40.0..40.0f64, -40.0..40.0f64), 1..6),
        keep in prop::collection::vec(any::<bool>(), 6),
    ) {
        let p = params();
        let s = walker(x, y, speed, theta);
        let zones: Vec<_> = centers.iter().enumerate().map(|(i, (cx, cy))| RedZone {
            area: Circle { center: LocalPoint::new(*cx, *cy), radius: 9.144 },
            level: 100.0,
            kind: ZoneKind::Trail,
            source: format!("z{i}"),
        }).collect();
        let subset: Vec<_> = zones.iter().zip(&keep).filter(|(_, k)| **k).map(|(z, _)| z.clone()).collect();
        let rank = |k: WarningKind| match k {
            WarningKind::AreaSafe => 0,
            WarningKind::RedZonePredicted => 1,
            WarningKind::InRedZone => 2,
        };
        let all = classify(&s, &zones, &p);
        let some = classify(&s, &subset, &p);
        prop_assert!(rank(some.kind) <= rank(all.kind));
        if all.kind == WarningKind::AreaSafe {
            prop_assert!(all.cause.is_none() && all.time_to_contact.is_none());
        }
    }

    #[test]
    fn validation_is_idempotent(
        dx in -500.0..500.0f64, dy in -500.0..500.0f64,
        speed in 0.0..15.0f64, heading in 0.0..360.0f64, healthy: bool, t_ms in 0u64..1_000_000,
    ) {
        let frame = FrameOrigin::new(GeoPoint { lat: 39.9995, lon: -83.0128 }).unwrap();
        let g = to_geo(&LocalPoint::new(dx, dy), &frame).unwrap();
        let msg = StateMessage { id: "p".into(), lat: g.lat, lon: g.lon, speed_mps: speed, heading_deg: heading, healthy, t_ms };
        let s = validate_state(&msg, &frame, None).unwrap();
        let again = validate_state(&s.to_message(), &frame, None).unwrap();
        prop_assert!((again.position.x - s.position.x).abs() < 1e-6);
        prop_assert!((again.position.y - s.position.y).abs() < 1e-6);
        prop_assert!((again.theta - s.theta).abs() < 1e-9);
        prop_assert_eq!(again.speed, s.speed);
        prop_assert_eq!(again.healthy, s.healthy);
        prop_assert_eq!(again.stamp, s.stamp);
        prop_assert!((s.theta - heading_to_theta(heading).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn local_round_trip(lat in -80.0..80.0f64, lon in -179.0..179.0f64, x in -10_000.0..10_000.0f64, y in -10_000.0..10_000.0f64) {
        let frame = FrameOrigin::new(GeoPoint { lat, lon }).unwrap();
        let p = LocalPoint::new(x, y);
        let back = to_local(&to_geo(&p, &frame).unwrap(), &frame).unwrap();
        prop_assert!(back.distance(&p) < 1e-6);
    }
}
