//! The fixed-step world loop and the parameterized ego planner.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::route::Polyline;
use super::{NpcScript, ScenarioScript, ScriptError};
use crate::geometry::{Obb, Vec2};
use crate::mudrive::{step_rules, MuDriveProgram, PlannerParams, RuleStates};
use crate::trace::{
    EgoState, Gear, LightColor, MapContext, Obstacle, PredictedPoint, RawRecordFrame, Scene,
    TrafficLightState, DEFAULT_DT, EGO_HALF_LEN, EGO_HALF_WID, NO_FEATURE_DIST, STOPPED_KMH,
};

pub const LANE_WIDTH: f64 = 3.5;

const BASE_ACCEL: f64 = 3.0;
/// Lateral speed of a lane change, m/s.
const LATERAL_RATE: f64 = 1.0;
const LANE_CHANGE_KMH: f64 = 15.0;
const BORROW_AFTER_S: f64 = 5.0;
const PREDICT_HORIZON_S: f64 = 3.0;
const YIELD_HORIZON_S: f64 = 20.0;
const YIELD_SAMPLE_S: f64 = 0.25;
/// Conflict points further ahead of the ego than this are ignored.
const YIELD_LOOKAHEAD_M: f64 = 100.0;
const FRAME_PREDICT_S: f64 = 0.5;
const FOLLOW_GAIN: f64 = 0.5;
const SAFETY_GAP_M: f64 = 3.0;
/// Fraction of the braking limit at which stopping for a stop point begins.
const BRAKE_ONSET: f64 = 0.9;
const LATERAL_CLEARANCE: f64 = 0.3;
/// NPCs within this heading difference of the route travel along it.
const ALIGNED_RAD: f64 = PI / 6.0;
/// A light stays reported until the front bumper is this far past its stop line.
const LIGHT_REPORT_PAST_M: f64 = 5.0;
const SIGN_REPORT_PAST_M: f64 = 2.0;
/// Stop-sign halt point: front bumper this far before the line.
const SIGN_STOP_GAP_M: f64 = 1.0;
const REACHED_M: f64 = 1.0;
const WHEELBASE_M: f64 = 2.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Cruise,
    Follow,
    StopForLight,
    StopForSign,
    StopForObstacle,
    Yield,
    Borrow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    ReachedDestination,
    Collided,
    TimedOut,
}

/// Ego state in route coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteEgoState {
    pub s: f64,
    /// km/h
    pub speed: f64,
    /// Metres left of the lane centre.
    pub lane_offset: f64,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub frames: Vec<RawRecordFrame>,
    /// Ego state at each frame.
    pub states: Vec<RouteEgoState>,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Copy)]
struct NpcPose {
    pos: Vec2,
    heading: f64,
    /// m/s
    speed: f64,
}

fn npc_pose(npc: &NpcScript, t: f64) -> NpcPose {
    let wps = &npc.waypoints;
    let first = wps[0];
    let mut heading = npc.heading;
    if t <= first.t {
        return NpcPose {
            pos: Vec2::new(first.x, first.y),
            heading,
            speed: 0.0,
        };
    }
    for w in wps.windows(2) {
        let (a, b) = (w[0], w[1]);
        let d = Vec2::new(b.x - a.x, b.y - a.y);
        let len = d.norm();
        if len > 1e-9 {
            heading = d.y.atan2(d.x);
        }
        if t <= b.t {
            let u = (t - a.t) / (b.t - a.t);
            return NpcPose {
                pos: Vec2::new(a.x, a.y).add(d.scale(u)),
                heading,
                speed: len / (b.t - a.t),
            };
        }
    }
    let last = wps[wps.len() - 1];
    NpcPose {
        pos: Vec2::new(last.x, last.y),
        heading,
        speed: 0.0,
    }
}

fn wrap(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a < -PI {
        a += 2.0 * PI;
    }
    a
}

/// An NPC pose seen from the route: arc length, lateral offset relative to the ego's
/// lateral position, and its half-extents along and across the route.
struct RouteView {
    s: f64,
    rel_lat: f64,
    ext_lon: f64,
    ext_lat: f64,
    aligned: bool,
}

impl RouteView {
    fn in_corridor(&self) -> bool {
        self.rel_lat.abs() < self.ext_lat + EGO_HALF_WID + LATERAL_CLEARANCE
    }
}

struct World<'a> {
    script: &'a ScenarioScript,
    route: Polyline,
    dest_s: f64,
    stop_signs: Vec<f64>,
    light_order: Vec<usize>,
}

impl<'a> World<'a> {
    fn new(script: &'a ScenarioScript) -> Self {
        let route = Polyline::new(&script.route.waypoints);
        let d = script.destination;
        let dest_s = route.project(Vec2::new(d[0], d[1])).s;
        let mut stop_signs = script.stop_signs.clone();
        stop_signs.sort_by(f64::total_cmp);
        let mut light_order: Vec<usize> = (0..script.lights.len()).collect();
        light_order.sort_by(|&a, &b| script.lights[a].stopline_s.total_cmp(&script.lights[b].stopline_s));
        World {
            script,
            route,
            dest_s,
            stop_signs,
            light_order,
        }
    }

    fn view(&self, npc: &NpcScript, pose: NpcPose, lane_offset: f64) -> RouteView {
        let pr = self.route.project(pose.pos);
        let dh = wrap(pose.heading - pr.heading);
        let (hl, hw) = npc.extents();
        let (c, s) = (dh.cos().abs(), dh.sin().abs());
        RouteView {
            s: pr.s,
            rel_lat: pr.d - lane_offset,
            ext_lon: hl * c + hw * s,
            ext_lat: hw * c + hl * s,
            aligned: dh.abs() < ALIGNED_RAD,
        }
    }

    fn segment_index(&self, s: f64) -> usize {
        let wps = &self.script.route.waypoints;
        let mut acc = 0.0;
        for (i, w) in wps.windows(2).enumerate() {
            acc += (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
            if s < acc {
                return i;
            }
        }
        wps.len() - 2
    }

    fn ego_heading(&self, ego: &Ego) -> f64 {
        let base = self.route.heading_at(ego.s);
        let lat_v = (ego.target_offset - ego.lane_offset).signum()
            * if (ego.target_offset - ego.lane_offset).abs() > 1e-9 { LATERAL_RATE } else { 0.0 };
        base + lat_v.atan2(ego.v.max(1.0))
    }

    fn ego_box(&self, ego: &Ego) -> Obb {
        let p = self.route.point_at(ego.s, ego.lane_offset);
        Obb::new(p.x, p.y, self.ego_heading(ego), EGO_HALF_LEN, EGO_HALF_WID)
    }

    fn observe(&self, t: f64, ego: &Ego) -> RawRecordFrame {
        let script = self.script;
        let p = self.route.point_at(ego.s, ego.lane_offset);
        let heading = self.ego_heading(ego);
        let front = ego.s + EGO_HALF_LEN;
        let rear = ego.s - EGO_HALF_LEN;
        let obstacles = script
            .npcs
            .iter()
            .map(|npc| {
                let pose = npc_pose(npc, t);
                let (hl, hw) = npc.extents();
                let steps = (PREDICT_HORIZON_S / FRAME_PREDICT_S).round() as usize;
                let predicted = (1..=steps)
                    .map(|k| {
                        let dt = k as f64 * FRAME_PREDICT_S;
                        let q = npc_pose(npc, t + dt);
                        PredictedPoint {
                            t_rel: dt,
                            x: q.pos.x,
                            y: q.pos.y,
                        }
                    })
                    .collect();
                Obstacle {
                    id: npc.id.clone(),
                    kind: npc.kind,
                    x: pose.pos.x,
                    y: pose.pos.y,
                    heading: pose.heading,
                    speed: pose.speed * 3.6,
                    half_len: hl,
                    half_wid: hw,
                    predicted,
                }
            })
            .collect();
        let traffic_light = self
            .light_order
            .iter()
            .map(|&i| &script.lights[i])
            .find(|l| l.stopline_s - front >= -LIGHT_REPORT_PAST_M)
            .map(|l| TrafficLightState {
                color: l.color_at(t),
                dist_to_stopline: l.stopline_s - front,
            });
        let junction = script.route.junctions.iter().find(|j| j.end > rear);
        let in_junction = junction.is_some_and(|j| front > j.start && rear < j.end);
        let dist_to_junction = junction.map_or(NO_FEATURE_DIST, |j| j.start - front);
        let lane_kind = if ego.lane_offset.abs() > LANE_WIDTH / 2.0 {
            script.route.adjacent_lane.kind
        } else {
            script.route.lane_kinds[self.segment_index(ego.s)]
        };
        let dist_to_stop_sign = self
            .stop_signs
            .iter()
            .map(|&x| x - front)
            .find(|&d| d >= -SIGN_REPORT_PAST_M)
            .unwrap_or(NO_FEATURE_DIST);
        RawRecordFrame {
            t,
            ego: EgoState {
                x: p.x,
                y: p.y,
                heading,
                speed: ego.v * 3.6,
                accel: ego.accel,
                steering: ego.steering,
                gear: Gear::Drive,
            },
            obstacles,
            traffic_light,
            weather: script.weather.clone(),
            map_ctx: MapContext {
                in_junction,
                dist_to_junction,
                lane_kind,
                dist_to_dest: (self.dest_s - ego.s).max(0.0),
                dist_to_stop_sign,
                is_changing_lane: (ego.target_offset - ego.lane_offset).abs() > 1e-9,
            },
        }
    }
}

#[derive(Debug, Clone)]
struct Ego {
    s: f64,
    /// m/s
    v: f64,
    accel: f64,
    steering: f64,
    lane_offset: f64,
    target_offset: f64,
    decision: Decision,
    /// Latched stop (true) or go (false) per light while it is not green.
    light_latch: Vec<Option<bool>>,
    light_passed: Vec<bool>,
    signs_cleared: usize,
    sign_wait: f64,
    blocked_for: f64,
    borrow_from: Option<usize>,
}

struct Target {
    v: f64,
    decision: Decision,
    /// Nearest stop point ahead of the ego centre (may be negative once overrun).
    stop: Option<(f64, Decision)>,
}

impl Target {
    fn cap(&mut self, v: f64, decision: Decision) {
        if v < self.v {
            self.v = v;
            self.decision = decision;
        }
    }

    fn stop_within(&mut self, dist: f64, decision: Decision) {
        if self.stop.is_none_or(|(d, _)| dist < d) {
            self.stop = Some((dist, decision));
        }
    }

    /// Longitudinal acceleration: track the speed target, and once the deceleration needed
    /// to halt at the stop point reaches the braking onset, apply exactly that deceleration.
    fn accel(&mut self, v: f64, a_max: f64, dt: f64) -> f64 {
        let mut a = ((self.v - v) / dt).clamp(-a_max, a_max);
        if let Some((d, decision)) = self.stop {
            let need = if d > 1e-6 { v * v / (2.0 * d) } else if v > 0.0 { f64::INFINITY } else { 0.0 };
            if need >= BRAKE_ONSET * a_max {
                a = a.min(-need.min(a_max));
                self.decision = decision;
            } else if v * 3.6 < STOPPED_KMH && d < 1.0 {
                a = a.min(0.0);
                self.decision = decision;
            }
        }
        a
    }
}

impl World<'_> {
    /// Whether the NPC's predicted path enters the ego's corridor ahead of the ego before
    /// the NPC has travelled `yield_dist` metres.
    fn crosses_within(&self, npc: &NpcScript, t: f64, ego: &Ego, yield_dist: f64) -> bool {
        let front = ego.s + EGO_HALF_LEN;
        let mut prev = npc_pose(npc, t).pos;
        let mut travelled = 0.0;
        let samples = (YIELD_HORIZON_S / YIELD_SAMPLE_S).round() as usize;
        for k in 0..=samples {
            let q = npc_pose(npc, t + k as f64 * YIELD_SAMPLE_S);
            travelled += q.pos.sub(prev).norm();
            prev = q.pos;
            if travelled > yield_dist {
                return false;
            }
            let v = self.view(npc, q, ego.lane_offset);
            let c = v.s - v.ext_lon - front;
            if v.in_corridor() && (0.0..=YIELD_LOOKAHEAD_M).contains(&c) {
                return true;
            }
        }
        false
    }

    /// Chooses the target speed for this tick and updates latches and manoeuvre state.
    fn plan(&self, t: f64, ego: &mut Ego, p: &PlannerParams) -> Target {
        let script = self.script;
        let a_max = BASE_ACCEL * p.obstacle_decrease_ratio;
        let front = ego.s + EGO_HALF_LEN;
        let mut target = Target {
            v: p.cruise_speed_kmh / 3.6,
            decision: Decision::Cruise,
            stop: None,
        };
        target.stop_within(self.dest_s - ego.s, Decision::Cruise);

        // traffic lights: the first one whose line the ego has not committed past
        for &i in &self.light_order {
            let l = &script.lights[i];
            if ego.light_passed[i] {
                continue;
            }
            if front > l.stopline_s && ego.light_latch[i] != Some(true) {
                ego.light_passed[i] = true;
                continue;
            }
            match l.color_at(t) {
                LightColor::Green | LightColor::Off => ego.light_latch[i] = None,
                LightColor::Red | LightColor::Yellow => {
                    let d = l.stopline_s - p.traffic_light_stop_dist_m - ego.s;
                    let latch = *ego.light_latch[i]
                        .get_or_insert_with(|| ego.v * ego.v <= 2.0 * a_max * d.max(0.0) + 1e-9);
                    if latch {
                        target.stop_within(d, Decision::StopForLight);
                    }
                }
            }
            break;
        }

        // stop signs
        if let Some(&sign) = self.stop_signs.get(ego.signs_cleared) {
            let stop_at = sign - SIGN_STOP_GAP_M - EGO_HALF_LEN;
            if ego.v * 3.6 < STOPPED_KMH && ego.s >= stop_at - 1.0 {
                ego.sign_wait += DEFAULT_DT;
            }
            if ego.sign_wait >= p.stop_sign_wait_s || front > sign + SIGN_REPORT_PAST_M {
                ego.signs_cleared += 1;
                ego.sign_wait = 0.0;
            } else {
                target.stop_within(stop_at - ego.s, Decision::StopForSign);
            }
        }

        // NPCs: lane obstacles, followed vehicles and yield conflicts
        let mut blocker: Option<(usize, f64)> = None;
        for (i, npc) in script.npcs.iter().enumerate() {
            let pose = npc_pose(npc, t);
            let view = self.view(npc, pose, ego.lane_offset);
            let gap = view.s - view.ext_lon - front;
            let ahead = view.s > ego.s;
            if view.in_corridor() && ahead {
                if pose.speed * 3.6 < STOPPED_KMH {
                    if ego.borrow_from == Some(i) {
                        target.stop_within(gap - SAFETY_GAP_M, Decision::Borrow);
                    } else {
                        target.stop_within(gap - p.obstacle_stop_dist_m, Decision::StopForObstacle);
                        if blocker.is_none_or(|(_, g)| gap < g) {
                            blocker = Some((i, gap));
                        }
                    }
                    continue;
                }
                if view.aligned {
                    let v_n = pose.speed * wrap(pose.heading - self.route.heading_at(view.s)).cos();
                    let follow = (v_n + FOLLOW_GAIN * (gap - p.follow_dist_m)).max(0.0);
                    let safe = (v_n.max(0.0).powi(2) + 2.0 * a_max * (gap - SAFETY_GAP_M).max(0.0)).sqrt();
                    target.cap(follow.min(safe), Decision::Follow);
                    continue;
                }
            }
            if view.aligned || pose.speed * 3.6 < STOPPED_KMH {
                continue;
            }
            if self.crosses_within(npc, t, ego, p.yield_dist_m) {
                target.cap(0.0, Decision::Yield);
            }
        }

        // lane borrow around a static blocker
        match blocker {
            Some((i, gap)) if ego.v * 3.6 < STOPPED_KMH && gap <= p.obstacle_stop_dist_m + 2.0 => {
                ego.blocked_for += DEFAULT_DT;
                if p.lane_borrow_enabled && ego.blocked_for > BORROW_AFTER_S && ego.borrow_from.is_none() {
                    let side = script.route.adjacent_lane.side.sign() * LANE_WIDTH;
                    let clear = script.npcs.iter().enumerate().all(|(j, npc)| {
                        if j == i {
                            return true;
                        }
                        let v = self.view(npc, npc_pose(npc, t), side);
                        let rel = v.s - ego.s;
                        !v.in_corridor() || !(-10.0..=p.overtake_dist_m).contains(&rel)
                    });
                    if clear {
                        ego.borrow_from = Some(i);
                        ego.target_offset = side;
                    }
                }
            }
            _ => ego.blocked_for = 0.0,
        }
        if let Some(i) = ego.borrow_from {
            let npc = &script.npcs[i];
            let view = self.view(npc, npc_pose(npc, t), ego.lane_offset);
            if view.s + view.ext_lon < ego.s - EGO_HALF_LEN - 6.0 {
                ego.borrow_from = None;
                ego.target_offset = 0.0;
            }
        }
        if (ego.target_offset - ego.lane_offset).abs() > 1e-9 {
            target.cap(LANE_CHANGE_KMH / 3.6, Decision::Borrow);
        }
        target
    }
}

/// Replays `script` with `program` (if any) overwriting `base` each tick.
pub fn run_scenario(
    script: &ScenarioScript,
    program: Option<&MuDriveProgram>,
    base: &PlannerParams,
) -> Result<SimRun, ScriptError> {
    script.validate()?;
    let world = World::new(script);
    let dt = DEFAULT_DT;
    let mut ego = Ego {
        s: 0.0,
        v: script.ego_start_speed_kmh / 3.6,
        accel: 0.0,
        steering: 0.0,
        lane_offset: 0.0,
        target_offset: 0.0,
        decision: Decision::Cruise,
        light_latch: vec![None; script.lights.len()],
        light_passed: vec![false; script.lights.len()],
        signs_cleared: 0,
        sign_wait: 0.0,
        blocked_for: 0.0,
        borrow_from: None,
    };
    let mut rules = RuleStates::new();
    let mut frames = Vec::new();
    let mut states = Vec::new();
    let max_steps = (script.duration_s / dt + 1e-9).floor() as usize;
    let mut step = 0usize;
    let outcome = loop {
        let t = step as f64 * dt;
        let frame = world.observe(t, &ego);
        let params = match program {
            Some(prog) => {
                let (params, next) = step_rules(prog, &Scene::from_frame(&frame), &rules, base);
                rules = next;
                params
            }
            None => base.clone(),
        };
        let mut target = world.plan(t, &mut ego, &params);
        let a_max = BASE_ACCEL * params.obstacle_decrease_ratio;
        let a = target.accel(ego.v, a_max, dt);
        ego.decision = target.decision;
        frames.push(frame);
        states.push(RouteEgoState {
            s: ego.s,
            speed: ego.v * 3.6,
            lane_offset: ego.lane_offset,
            decision: ego.decision,
        });

        let v1 = (ego.v + a * dt).max(0.0);
        let heading0 = world.ego_heading(&ego);
        let ds = if v1 == 0.0 && a < 0.0 {
            // halts within the tick
            (ego.v * ego.v / (-2.0 * a)).min(0.5 * ego.v * dt)
        } else {
            0.5 * (ego.v + v1) * dt
        };
        ego.s += ds;
        ego.accel = (v1 - ego.v) / dt;
        ego.v = v1;
        let dl = ego.target_offset - ego.lane_offset;
        ego.lane_offset += dl.clamp(-LATERAL_RATE * dt, LATERAL_RATE * dt);
        let dpsi = wrap(world.ego_heading(&ego) - heading0);
        ego.steering = if ds > 1e-6 {
            (WHEELBASE_M * dpsi / ds).atan().to_degrees()
        } else {
            0.0
        };
        step += 1;

        let t1 = step as f64 * dt;
        let ego_box = world.ego_box(&ego);
        let collided = script.npcs.iter().any(|npc| {
            let q = npc_pose(npc, t1);
            let (hl, hw) = npc.extents();
            ego_box.overlaps(&Obb::new(q.pos.x, q.pos.y, q.heading, hl, hw))
        });
        let outcome = if collided {
            Some(Outcome::Collided)
        } else if world.dest_s - ego.s <= REACHED_M {
            Some(Outcome::ReachedDestination)
        } else if step >= max_steps {
            Some(Outcome::TimedOut)
        } else {
            None
        };
        if let Some(o) = outcome {
            frames.push(world.observe(t1, &ego));
            states.push(RouteEgoState {
                s: ego.s,
                speed: ego.v * 3.6,
                lane_offset: ego.lane_offset,
                decision: ego.decision,
            });
            break o;
        }
    };
    Ok(SimRun {
        frames,
        states,
        outcome,
    })
}
