//! Rule activation and parameter overwriting, one planning tick at a time.

use serde::{Deserialize, Serialize};

use super::{Arg, Call, MuDriveProgram, Rule, ALWAYS};
use crate::trace::{LightColor, Scene, Signal};

/// Planner parameters that rules may overwrite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerParams {
    pub cruise_speed_kmh: f64,
    pub follow_dist_m: f64,
    pub yield_dist_m: f64,
    pub overtake_dist_m: f64,
    pub obstacle_stop_dist_m: f64,
    /// Multiplier on the acceleration and braking limits.
    pub obstacle_decrease_ratio: f64,
    /// Distance from the stop line at which the vehicle centre halts for a light.
    pub traffic_light_stop_dist_m: f64,
    pub stop_sign_wait_s: f64,
    pub lane_borrow_enabled: bool,
}

impl Default for PlannerParams {
    fn default() -> Self {
        PlannerParams {
            cruise_speed_kmh: 72.0,
            follow_dist_m: 15.0,
            yield_dist_m: 20.0,
            overtake_dist_m: 30.0,
            obstacle_stop_dist_m: 8.0,
            obstacle_decrease_ratio: 1.0,
            traffic_light_stop_dist_m: 2.0,
            stop_sign_wait_s: 2.0,
            lane_borrow_enabled: false,
        }
    }
}

impl PlannerParams {
    /// Human-readable listing, in declaration order, with units.
    pub fn describe(&self) -> Vec<String> {
        vec![
            format!("max planning speed = {} km/h", fmt(self.cruise_speed_kmh)),
            format!("follow distance = {} m", fmt(self.follow_dist_m)),
            format!("yield distance = {} m", fmt(self.yield_dist_m)),
            format!("overtake distance = {} m", fmt(self.overtake_dist_m)),
            format!("obstacle stop distance = {} m", fmt(self.obstacle_stop_dist_m)),
            format!("obstacle decrease ratio = {}", fmt(self.obstacle_decrease_ratio)),
            format!("traffic light stop distance = {} m", fmt(self.traffic_light_stop_dist_m)),
            format!("stop sign wait = {} s", fmt(self.stop_sign_wait_s)),
            format!(
                "lane borrow = {}",
                if self.lane_borrow_enabled { "enabled" } else { "disabled" }
            ),
        ]
    }

    /// Applies one action. Unknown actions and ill-typed arguments are ignored.
    pub fn apply(&mut self, action: &Call) {
        let num = match action.args.first() {
            Some(Arg::Num(v)) => Some(v.max(0.0)),
            _ => None,
        };
        let flag = match action.args.first() {
            Some(Arg::Bool(b)) => Some(*b),
            _ => None,
        };
        let slot = match action.name.as_str() {
            "cruise_speed" => &mut self.cruise_speed_kmh,
            "follow_dist" => &mut self.follow_dist_m,
            "yield_dist" => &mut self.yield_dist_m,
            "overtake_dist" => &mut self.overtake_dist_m,
            "obstacle_stop_dist" => &mut self.obstacle_stop_dist_m,
            "obstacle_decrease_ratio" => &mut self.obstacle_decrease_ratio,
            "traffic_light_stop_dist" => &mut self.traffic_light_stop_dist_m,
            "stop_sign_wait" => &mut self.stop_sign_wait_s,
            "enable_lane_borrow" => {
                if let Some(b) = flag {
                    self.lane_borrow_enabled = b;
                }
                return;
            }
            _ => return,
        };
        if let Some(v) = num {
            *slot = v;
        }
    }
}

fn fmt(v: f64) -> String {
    super::format_number(v)
}

/// Per-episode interpreter state: the previous scene and which rules are active.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RuleStates {
    pub prev: Option<Scene>,
    pub active: Vec<bool>,
}

impl RuleStates {
    pub fn new() -> Self {
        RuleStates::default()
    }
}

const APPROACH_M: f64 = 30.0;
const CONGESTED_COUNT: f64 = 3.0;

fn rising(prev: Option<&Scene>, cur: &Scene, pred: impl Fn(&Scene) -> bool) -> bool {
    prev.is_some_and(|p| !pred(p)) && pred(cur)
}

/// Whether `event` fires on the transition `prev -> cur`.
pub(crate) fn event_fires(event: &Call, prev: Option<&Scene>, cur: &Scene) -> bool {
    let in_junction = |s: &Scene| s.flag(Signal::InJunction);
    match event.name.as_str() {
        ALWAYS => true,
        "entering_junction" => rising(prev, cur, in_junction),
        "exiting_junction" => rising(prev, cur, |s| !in_junction(s)),
        "approaching_stop_sign" => rising(prev, cur, |s| s.get(Signal::StopSignDist) <= APPROACH_M),
        "approaching_crosswalk" => rising(prev, cur, |s| {
            let d = s.get(Signal::JunctionDist);
            d > 0.0 && d <= APPROACH_M
        }),
        "episode_start" => prev.is_none(),
        _ => false,
    }
}

fn num_arg(c: &Call) -> Option<f64> {
    match c.args.first() {
        Some(Arg::Num(v)) => Some(*v),
        _ => None,
    }
}

fn ident_arg(c: &Call) -> Option<&str> {
    match c.args.first() {
        Some(Arg::Ident(s)) | Some(Arg::Str(s)) => Some(s),
        _ => None,
    }
}

/// Truth of a condition in `scene`; unknown or ill-typed conditions are false.
pub(crate) fn condition_holds(c: &Call, scene: &Scene) -> bool {
    let get = |s| scene.get(s);
    match c.name.as_str() {
        "is_traffic_light" => {
            let code = match ident_arg(c) {
                Some("red") => LightColor::Red.code(),
                Some("yellow") => LightColor::Yellow.code(),
                Some("green") => LightColor::Green.code(),
                _ => return false,
            };
            get(Signal::TrafficLightColor) == code
        }
        "traffic_light_distance_leq" => num_arg(c).is_some_and(|m| {
            get(Signal::TrafficLightColor) != LightColor::Off.code() && get(Signal::StoplineDist) <= m
        }),
        "obstacle_distance_leq" => num_arg(c).is_some_and(|m| get(Signal::NearestNpcDist) <= m),
        "front_vehicle_closer_than" => num_arg(c).is_some_and(|m| get(Signal::NpcAheadDist) < m),
        "speed_gt" => num_arg(c).is_some_and(|v| get(Signal::Speed) > v),
        "speed_leq" => num_arg(c).is_some_and(|v| get(Signal::Speed) <= v),
        "is_weather" => match ident_arg(c) {
            Some("rain") => get(Signal::RainIntensity) > 0.0,
            Some("fog") => get(Signal::FogIntensity) > 0.0,
            Some("snow") => get(Signal::SnowIntensity) > 0.0,
            _ => false,
        },
        "visibility_leq" => num_arg(c).is_some_and(|m| get(Signal::Visibility) <= m),
        "in_junction" => scene.flag(Signal::InJunction),
        "junction_congested" => get(Signal::JunctionJam) >= CONGESTED_COUNT,
        _ => false,
    }
}

fn conditions_hold(r: &Rule, scene: &Scene) -> bool {
    r.conditions
        .iter()
        .all(|c| condition_holds(&c.call, scene) != c.negated)
}

/// Advances the interpreter by one tick and returns the parameters in force.
///
/// `always` rules are active exactly while their conditions hold. An event rule becomes
/// active when its trigger fires with conditions holding; with an `until` event it stays
/// active until that event fires, otherwise until its conditions stop holding. Active
/// rules overwrite a copy of `base` in program order, so later rules win.
pub fn step_rules(
    p: &MuDriveProgram,
    scene: &Scene,
    prev: &RuleStates,
    base: &PlannerParams,
) -> (PlannerParams, RuleStates) {
    let prev_scene = prev.prev.as_ref();
    let mut active = Vec::with_capacity(p.rules.len());
    let mut params = base.clone();
    for (i, r) in p.rules.iter().enumerate() {
        let was = prev.active.get(i).copied().unwrap_or(false);
        let now = if r.trigger.name == ALWAYS {
            conditions_hold(r, scene)
        } else if was {
            match &r.until {
                Some(u) => !event_fires(u, prev_scene, scene),
                None => conditions_hold(r, scene),
            }
        } else {
            event_fires(&r.trigger, prev_scene, scene) && conditions_hold(r, scene)
        };
        if now {
            for a in &r.actions {
                params.apply(a);
            }
        }
        active.push(now);
    }
    (
        params,
        RuleStates {
            prev: Some(scene.clone()),
            active,
        },
    )
}
