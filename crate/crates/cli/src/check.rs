//! Quick self-test of the engine's invariants, runnable from the binary.

use anyhow::{bail, Result};
use safewalk_core::contamination::{contamination_level, ContaminationField, ContaminationPuff};
use safewalk_core::geodesy::{to_geo, to_local, FrameOrigin, GeoPoint, LocalPoint};
use safewalk_core::harness::{bundled, replay_through_relay, run};
use safewalk_core::model::{circles_intersect, Circle, EngineParams, PedestrianState};
use safewalk_core::prediction::{classify, predict_position, WarningKind};

type Check = fn() -> Result<()>;

pub fn run_all() -> Result<()> {
    let checks: [(&str, Check); 6] = [
        ("geodesy round trip", geodesy),
        ("circle intersection symmetry", circles),
        ("decay monotone and bounded", decay),
        ("constant-velocity prediction", prediction),
        ("bundled scenarios", scenarios),
        ("advisory matches replay", differential),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(()) => println!("ok    {name}"),
            Err(e) => {
                failed += 1;
                println!("FAIL  {name}: {e}");
            }
        }
    }
    if failed > 0 {
        bail!("{failed} check(s) failed");
    }
    Ok(())
}

fn geodesy() -> Result<()> {
    for lat in (-80..=80).step_by(10) {
        let f = FrameOrigin::new(GeoPoint { lat: lat as f64, lon: 10.0 })?;
        for (x, y) in [(0.0, 0.0), (1000.0, -250.0), (-5000.0, 5000.0)] {
            let p = LocalPoint::new(x, y);
            let back = to_local(&to_geo(&p, &f)?, &f)?;
            if back.distance(&p) > 1e-6 {
                bail!("({x}, {y}) at lat {lat} came back as {back:?}");
            }
        }
    }
    Ok(())
}

fn circles() -> Result<()> {
    for i in 0..400 {
        let a = Circle { center: LocalPoint::new((i % 20) as f64 - 10.0, (i / 20) as f64 - 10.0), radius: 3.0 };
        let b = Circle { center: LocalPoint::new(0.5, -1.5), radius: 1.0 + (i % 7) as f64 };
        if circles_intersect(&a, &b) != circles_intersect(&b, &a) {
            bail!("asymmetric on {a:?} {b:?}");
        }
    }
    Ok(())
}

fn decay() -> Result<()> {
    let p = EngineParams::<f64>::demo();
    let puff = ContaminationPuff {
        area: Circle { center: LocalPoint::origin(), radius: p.bubble_radius },
        born: 0,
        c_start: p.c_start,
        emitter: "u".into(),
    };
    let mut prev = f64::INFINITY;
    for ms in (0..10_000).step_by(10) {
        let c = contamination_level(&puff, &p, ms)?;
        if c > prev || !(0.0..=100.0).contains(&c) {
            bail!("level {c} at {ms} ms after {prev}");
        }
        prev = c;
    }
    let mut field = ContaminationField::new();
    field.push(puff);
    field.prune(&p, 6000);
    if !field.is_empty() {
        bail!("puff outlived its airborne time");
    }
    Ok(())
}

fn prediction() -> Result<()> {
    let p = EngineParams::<f64>::demo();
    for k in 0..360 {
        let theta = (k as f64 - 180.0).to_radians();
        let s = PedestrianState {
            id: "w".into(),
            position: LocalPoint::new(3.0, -4.0),
            geo: GeoPoint { lat: 0.0, lon: 0.0 },
            speed: 1.4,
            theta,
            healthy: true,
            stamp: 0,
        };
        let q = predict_position(&s, 2.0);
        if (q.x - (3.0 + 2.8 * theta.cos())).abs() > 1e-9 || (q.y - (-4.0 + 2.8 * theta.sin())).abs() > 1e-9 {
            bail!("prediction off at theta {theta}");
        }
        if classify(&s, &[], &p).kind != WarningKind::AreaSafe {
            bail!("warning with no red zones");
        }
    }
    Ok(())
}

fn scenarios() -> Result<()> {
    use WarningKind::*;
    let t1 = run(&bundled::scenario1()?, None)?;
    let kinds: Vec<_> = t1.warning_runs("user").into_iter().map(|(k, _)| k).collect();
    if kinds != [AreaSafe, RedZonePredicted, InRedZone, AreaSafe] {
        bail!("scenario1 user sequence {kinds:?}");
    }
    let t2 = run(&bundled::scenario2()?, None)?;
    let w = t2.warnings("user");
    if !w.contains(&RedZonePredicted) || w.contains(&InRedZone) || w.last() != Some(&AreaSafe) {
        bail!("scenario2 user sequence {:?}", t2.warning_runs("user"));
    }
    if run(&bundled::scenario1()?, None)?.to_ndjson() != t1.to_ndjson() {
        bail!("replay not deterministic");
    }
    Ok(())
}

fn differential() -> Result<()> {
    for script in [bundled::scenario1()?, bundled::scenario2()?] {
        let trace = run(&script, None)?;
        let log = replay_through_relay(&script, None)?;
        for id in trace.ids() {
            let advised: Vec<_> = log.by_id.get(&id).into_iter().flatten().map(|(_, a)| a.state).collect();
            if advised != trace.warnings(&id) {
                bail!("{}: {id} differs", script.name);
            }
        }
    }
    Ok(())
}
