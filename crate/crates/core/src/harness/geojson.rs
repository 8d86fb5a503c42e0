//! GeoJSON export of a replay: paths, puff circles and warning transitions.

use serde_json::{json, Value};

use crate::geodesy::{self, FrameOrigin, LocalPoint};
use crate::harness::scenario::ScenarioScript;
use crate::harness::trace::Trace;

/// Vertices used to approximate a puff circle.
pub const CIRCLE_SEGMENTS: usize = 32;

fn lon_lat(p: &LocalPoint<f64>, frame: &FrameOrigin<f64>) -> Option<Value> {
    let g = geodesy::to_geo(p, frame).ok()?;
    Some(json!([round7(g.lon), round7(g.lat)]))
}

fn round7(v: f64) -> f64 {
    (v * 1e7).round() / 1e7
}

fn ring(center: &LocalPoint<f64>, radius: f64, frame: &FrameOrigin<f64>) -> Vec<Value> {
    let mut pts: Vec<Value> = (0..CIRCLE_SEGMENTS)
        .filter_map(|k| {
            let a = std::f64::consts::TAU * k as f64 / CIRCLE_SEGMENTS as f64;
            lon_lat(&center.offset(radius * a.cos(), radius * a.sin()), frame)
        })
        .collect();
    if let Some(first) = pts.first().cloned() {
        pts.push(first);
    }
    pts
}

/// Builds a FeatureCollection from `trace`, placed on the map through the
/// script's origin.
pub fn trace_to_geojson(trace: &Trace, script: &ScenarioScript) -> Value {
    let Ok(frame) = FrameOrigin::new(script.origin) else {
        return json!({ "type": "FeatureCollection", "features": [] });
    };
    let mut features = Vec::new();

    for id in trace.ids() {
        let coords: Vec<Value> = trace.events_for(&id).filter_map(|e| lon_lat(&e.position, &frame)).collect();
        let healthy = script.tracks.iter().find(|t| t.id == id).map(|t| t.healthy);
        let geometry = if coords.len() >= 2 {
            json!({ "type": "LineString", "coordinates": coords })
        } else {
            json!({ "type": "Point", "coordinates": coords.first().cloned().unwrap_or(Value::Null) })
        };
        features.push(json!({
            "type": "Feature",
            "geometry": geometry,
            "properties": { "feature": "path", "id": id, "healthy": healthy },
        }));
    }

    for puff in trace.puffs.iter().filter(|p| p.level_pct > 0.0) {
        features.push(json!({
            "type": "Feature",
            "geometry": { "type": "Polygon", "coordinates": [ring(&puff.center, puff.radius, &frame)] },
            "properties": {
                "feature": "puff",
                "t_s": puff.t_s,
                "emitter": puff.emitter,
                "level_pct": (puff.level_pct * 1000.0).round() / 1000.0,
                "opacity": puff.level_pct / 100.0,
            },
        }));
    }

    for id in trace.ids() {
        for (from, e) in trace.transitions(&id) {
            features.push(json!({
                "type": "Feature",
                "geometry": { "type": "Point", "coordinates": lon_lat(&e.position, &frame) },
                "properties": {
                    "feature": "transition",
                    "id": id,
                    "t_s": e.t_s,
                    "from": from.as_str(),
                    "to": e.warning.kind.as_str(),
                },
            }));
        }
    }

    json!({ "type": "FeatureCollection", "features": features })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::sim::run;

    fn script() -> ScenarioScript {
        ScenarioScript::from_json(
            r#"{"name":"t","origin":{"lat":40.0,"lon":-83.0},"params":{"t_airborne":6},"tracks":[
                {"id":"sick","healthy":false,"waypoints":[{"t_s":0,"x":0,"y":0},{"t_s":4,"x":5.6,"y":0}]}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn empty_trace_is_empty_collection() {
        let v = trace_to_geojson(&Trace::default(), &script());
        assert_eq!(v, json!({ "type": "FeatureCollection", "features": [] }));
    }

    #[test]
    fn puffs_become_closed_polygons() {
        let s = script();
        let trace = run(&s, None).unwrap();
        let v = trace_to_geojson(&trace, &s);
        let features = v["features"].as_array().unwrap();
        let paths: Vec<_> = features.iter().filter(|f| f["properties"]["feature"] == "path").collect();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0]["geometry"]["coordinates"].as_array().unwrap().len(), 5);
        let puffs: Vec<_> = features.iter().filter(|f| f["properties"]["feature"] == "puff").collect();
        // 1 + 2 + 3 + 4 + 5 puffs alive over ticks 0..=4
        assert_eq!(puffs.len(), 15);
        for p in puffs {
            let level = p["properties"]["level_pct"].as_f64().unwrap();
            assert!(level > 0.0 && level <= 100.0);
            let ring = p["geometry"]["coordinates"][0].as_array().unwrap();
            assert_eq!(ring.len(), CIRCLE_SEGMENTS + 1);
            assert_eq!(ring.first(), ring.last());
        }
    }
}
