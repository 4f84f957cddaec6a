//! Kinematic replay of scripted scenarios along a lane-centre route.
//!
//! The ego moves in 1.5 dimensions: arc length along the route plus a lateral lane offset
//! used for lane borrowing. NPCs follow timed waypoints and are perfectly predicted.

mod metrics;
mod route;
mod suite;
mod world;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{LaneKind, LightColor, ObstacleKind, Weather};

pub use metrics::{evaluate_trace, TraceMetrics, EGO_MASS_KG};
pub use suite::{benchmark_suite, reference_repair, reference_repair_source, scenario, SCENARIO_IDS};
pub use world::{run_scenario, Decision, Outcome, RouteEgoState, SimRun, LANE_WIDTH};

pub const DEFAULT_DURATION_S: f64 = 200.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScriptError {
    #[error("scenario {id}: {msg}")]
    Invalid { id: String, msg: String },
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("unknown scenario `{0}`")]
    Unknown(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    #[default]
    Left,
    Right,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }
}

/// The lane a borrow manoeuvre moves into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjacentLane {
    pub side: Side,
    pub kind: LaneKind,
}

impl Default for AdjacentLane {
    fn default() -> Self {
        AdjacentLane {
            side: Side::Left,
            kind: LaneKind::Normal,
        }
    }
}

/// Arc-length interval `[start, end]` along the route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteScript {
    pub waypoints: Vec<[f64; 2]>,
    /// One entry per segment between consecutive waypoints.
    pub lane_kinds: Vec<LaneKind>,
    #[serde(default)]
    pub junctions: Vec<Span>,
    #[serde(default)]
    pub adjacent_lane: AdjacentLane,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedWaypoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// km/h. Informational only; NPC motion interpolates positions between waypoints.
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NpcScript {
    pub id: String,
    pub kind: ObstacleKind,
    /// Defaults depend on the kind.
    #[serde(default)]
    pub half_len: Option<f64>,
    #[serde(default)]
    pub half_wid: Option<f64>,
    /// Heading used while the NPC has not moved yet; radians.
    #[serde(default)]
    pub heading: f64,
    pub waypoints: Vec<TimedWaypoint>,
}

impl NpcScript {
    pub fn extents(&self) -> (f64, f64) {
        let (l, w) = match self.kind {
            ObstacleKind::Vehicle => (2.4, 0.95),
            ObstacleKind::Pedestrian => (0.3, 0.3),
            ObstacleKind::Cyclist => (0.9, 0.35),
            ObstacleKind::Unknown => (0.5, 0.5),
        };
        (self.half_len.unwrap_or(l), self.half_wid.unwrap_or(w))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub color: LightColor,
    pub duration_s: f64,
}

/// A signal controlling one stop line. Phases run once in order; the last one then holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightScript {
    pub id: String,
    pub stopline_s: f64,
    pub phases: Vec<Phase>,
}

impl LightScript {
    pub fn color_at(&self, t: f64) -> LightColor {
        let mut end = 0.0;
        for p in &self.phases {
            end += p.duration_s;
            if t < end {
                return p.color;
            }
        }
        self.phases.last().map_or(LightColor::Off, |p| p.color)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScript {
    pub id: String,
    #[serde(default)]
    pub description: String,
    /// Name of the property this scenario is paired with.
    pub spec: String,
    pub route: RouteScript,
    #[serde(default)]
    pub npcs: Vec<NpcScript>,
    #[serde(default)]
    pub lights: Vec<LightScript>,
    #[serde(default)]
    pub weather: Weather,
    /// Arc lengths of stop-sign stop lines.
    #[serde(default)]
    pub stop_signs: Vec<f64>,
    pub destination: [f64; 2],
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default)]
    pub ego_start_speed_kmh: f64,
}

fn default_duration() -> f64 {
    DEFAULT_DURATION_S
}

impl ScenarioScript {
    pub fn validate(&self) -> Result<(), ScriptError> {
        let bad = |msg: String| {
            Err(ScriptError::Invalid {
                id: self.id.clone(),
                msg,
            })
        };
        let wps = &self.route.waypoints;
        if wps.len() < 2 {
            return bad("route needs at least two waypoints".into());
        }
        if wps.iter().flatten().any(|v| !v.is_finite()) {
            return bad("route waypoints must be finite".into());
        }
        if wps.windows(2).any(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]) < 1e-6) {
            return bad("route has a zero-length segment".into());
        }
        if self.route.lane_kinds.len() != wps.len() - 1 {
            return bad(format!(
                "{} lane kinds for {} route segments",
                self.route.lane_kinds.len(),
                wps.len() - 1
            ));
        }
        for j in &self.route.junctions {
            if !(j.start < j.end) {
                return bad(format!("junction span [{}, {}] is empty", j.start, j.end));
            }
        }
        for npc in &self.npcs {
            let (l, w) = npc.extents();
            if !(l > 0.0 && w > 0.0) {
                return bad(format!("npc {} has non-positive extents", npc.id));
            }
            if npc.waypoints.is_empty() {
                return bad(format!("npc {} has no waypoints", npc.id));
            }
            if npc.waypoints.windows(2).any(|w| !(w[1].t > w[0].t)) {
                return bad(format!("npc {} waypoints are not time-ordered", npc.id));
            }
            if npc.waypoints.iter().any(|w| !(w.speed >= 0.0)) {
                return bad(format!("npc {} has a negative speed", npc.id));
            }
        }
        for l in &self.lights {
            if l.phases.is_empty() {
                return bad(format!("light {} has no phases", l.id));
            }
            if l.phases.iter().any(|p| !(p.duration_s > 0.0)) {
                return bad(format!("light {} has a non-positive phase duration", l.id));
            }
        }
        if !(self.weather.visibility > 0.0) {
            return bad("visibility must be > 0".into());
        }
        if !(self.duration_s > 0.0) {
            return bad("duration must be > 0".into());
        }
        if !(self.ego_start_speed_kmh >= 0.0) {
            return bad("start speed must be >= 0".into());
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ScriptError> {
        let s: ScenarioScript = serde_json::from_str(text).map_err(|e| ScriptError::Invalid {
            id: "?".into(),
            msg: e.to_string(),
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScriptError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ScriptError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        ScenarioScript::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn light_schedule_holds_last_phase() {
        let l = LightScript {
            id: "l".into(),
            stopline_s: 10.0,
            phases: vec![
                Phase {
                    color: LightColor::Green,
                    duration_s: 2.0,
                },
                Phase {
                    color: LightColor::Red,
                    duration_s: 1.0,
                },
            ],
        };
        assert_eq!(l.color_at(0.0), LightColor::Green);
        assert_eq!(l.color_at(2.0), LightColor::Red);
        assert_eq!(l.color_at(50.0), LightColor::Red);
    }

    #[test]
    fn suite_scripts_validate_and_round_trip() {
        for s in benchmark_suite() {
            s.validate().unwrap();
            let text = serde_json::to_string(&s).unwrap();
            assert_eq!(ScenarioScript::from_json(&text).unwrap(), s);
        }
    }

    #[test]
    fn rejects_unordered_waypoints() {
        let mut s = scenario("S8").unwrap();
        s.npcs[0].waypoints = vec![
            TimedWaypoint { t: 1.0, x: 0.0, y: 0.0, speed: 0.0 },
            TimedWaypoint { t: 1.0, x: 1.0, y: 0.0, speed: 0.0 },
        ];
        assert!(matches!(s.validate(), Err(ScriptError::Invalid { .. })));
        let mut s = scenario("S8").unwrap();
        s.route.lane_kinds.clear();
        assert!(s.validate().is_err());
    }
}
