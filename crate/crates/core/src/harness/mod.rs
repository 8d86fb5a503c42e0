//! Scenario replay on a logical clock, trace output and GeoJSON export.

pub mod geojson;
pub mod live;
pub mod scenario;
pub mod sim;
pub mod trace;

pub use geojson::trace_to_geojson;
pub use live::{replay_through_relay, AdvisoryLog};
pub use scenario::{load_scenario, ScenarioError, ScenarioScript, Track, Waypoint};
pub use sim::{run, tick_count, tick_ms, HarnessError, Simulation, TrackDriver};
pub use trace::{collapse, PuffFrame, Trace, TraceEvent};

/// Bundled scenario files.
pub mod bundled {
    use super::{ScenarioError, ScenarioScript};

    pub const SCENARIO1: &str = include_str!("../../scenarios/scenario1.scenario.json");
    pub const SCENARIO2: &str = include_str!("../../scenarios/scenario2.scenario.json");

    pub fn scenario1() -> Result<ScenarioScript, ScenarioError> {
        ScenarioScript::from_json(SCENARIO1)
    }

    pub fn scenario2() -> Result<ScenarioScript, ScenarioError> {
        ScenarioScript::from_json(SCENARIO2)
    }
}
