//! The eight benchmark scenarios and a known-good repair for each.

use std::f64::consts::PI;

use super::{
    AdjacentLane, LightScript, NpcScript, Phase, RouteScript, ScenarioScript, Side, Span,
    TimedWaypoint, DEFAULT_DURATION_S,
};
use crate::mudrive::{parse_program, MuDriveProgram};
use crate::trace::{LaneKind, LightColor, ObstacleKind, Weather};

pub const SCENARIO_IDS: [&str; 8] = ["S1", "S2", "S3", "S4", "S5", "S6", "S7", "S8"];

fn straight(len: f64, kind: LaneKind) -> RouteScript {
    RouteScript {
        waypoints: vec![[0.0, 0.0], [len, 0.0]],
        lane_kinds: vec![kind],
        junctions: vec![],
        adjacent_lane: AdjacentLane::default(),
    }
}

/// Constant-speed straight-line motion from `from` (at `t0`) to `to`.
fn moving(id: &str, from: [f64; 2], to: [f64; 2], t0: f64, kmh: f64) -> NpcScript {
    let dist = (to[0] - from[0]).hypot(to[1] - from[1]);
    let t1 = t0 + dist / (kmh / 3.6);
    NpcScript {
        id: id.into(),
        kind: ObstacleKind::Vehicle,
        half_len: None,
        half_wid: None,
        heading: (to[1] - from[1]).atan2(to[0] - from[0]),
        waypoints: vec![
            TimedWaypoint { t: t0, x: from[0], y: from[1], speed: kmh },
            TimedWaypoint { t: t1, x: to[0], y: to[1], speed: kmh },
        ],
    }
}

fn parked(id: &str, at: [f64; 2], heading: f64) -> NpcScript {
    NpcScript {
        id: id.into(),
        kind: ObstacleKind::Vehicle,
        half_len: None,
        half_wid: None,
        heading,
        waypoints: vec![TimedWaypoint { t: 0.0, x: at[0], y: at[1], speed: 0.0 }],
    }
}

fn light(id: &str, stopline_s: f64, phases: &[(LightColor, f64)]) -> LightScript {
    LightScript {
        id: id.into(),
        stopline_s,
        phases: phases
            .iter()
            .map(|&(color, duration_s)| Phase { color, duration_s })
            .collect(),
    }
}

fn base(id: &str, spec: &str, description: &str, route: RouteScript, dest: [f64; 2]) -> ScenarioScript {
    ScenarioScript {
        id: id.into(),
        description: description.into(),
        spec: spec.into(),
        route,
        npcs: vec![],
        lights: vec![],
        weather: Weather::default(),
        stop_signs: vec![],
        destination: dest,
        duration_s: DEFAULT_DURATION_S,
        ego_start_speed_kmh: 0.0,
    }
}

fn s1() -> ScenarioScript {
    let mut route = straight(300.0, LaneKind::Normal);
    route.junctions.push(Span { start: 120.0, end: 150.0 });
    let mut s = base(
        "S1",
        "no_collision",
        "Green light at a junction; a bus crosses from the right and the ego does not yield.",
        route,
        [260.0, 0.0],
    );
    s.ego_start_speed_kmh = 72.0;
    s.lights.push(light("L1", 118.0, &[(LightColor::Green, 1000.0)]));
    let crossing_t = 7.0;
    let mut bus = moving("bus", [135.0, -10.0 * crossing_t], [135.0, 200.0], 0.0, 36.0);
    bus.half_len = Some(6.0);
    bus.half_wid = Some(1.3);
    s.npcs.push(bus);
    s
}

fn s2() -> ScenarioScript {
    let mut waypoints = vec![[0.0, 0.0], [100.0, 0.0]];
    for k in 1..=6 {
        let th = f64::from(k) * PI / 12.0;
        waypoints.push([100.0 + 10.0 * th.sin(), 10.0 - 10.0 * th.cos()]);
    }
    waypoints.push([110.0, 200.0]);
    let route = RouteScript {
        lane_kinds: vec![LaneKind::Normal; waypoints.len() - 1],
        waypoints,
        junctions: vec![Span { start: 98.0, end: 126.0 }],
        adjacent_lane: AdjacentLane::default(),
    };
    let mut s = base(
        "S2",
        "no_collision",
        "Left turn after a stop sign across oncoming straight-through traffic.",
        route,
        [110.0, 150.0],
    );
    s.stop_signs.push(98.0);
    let arrive_t = 17.0;
    let kmh = 90.0;
    let x0 = 107.6 + kmh / 3.6 * arrive_t;
    s.npcs.push(moving("oncoming", [x0, 3.5], [-100.0, 3.5], 0.0, kmh));
    s
}

fn s3() -> ScenarioScript {
    let mut route = straight(400.0, LaneKind::Normal);
    route.junctions.push(Span { start: 151.0, end: 171.0 });
    let mut s = base(
        "S3",
        "law38_yellow",
        "The light turns yellow shortly before the stop line and the ego carries on into the junction.",
        route,
        [330.0, 0.0],
    );
    s.ego_start_speed_kmh = 72.0;
    s.lights.push(light(
        "L1",
        150.0,
        &[
            (LightColor::Green, 5.6),
            (LightColor::Yellow, 3.0),
            (LightColor::Red, 20.0),
            (LightColor::Green, 1000.0),
        ],
    ));
    s
}

fn s4() -> ScenarioScript {
    let mut route = straight(300.0, LaneKind::Normal);
    route.junctions.push(Span { start: 121.0, end: 141.0 });
    let mut s = base(
        "S4",
        "law38_red",
        "The ego halts for a red light but its front ends up past the stop line.",
        route,
        [250.0, 0.0],
    );
    s.ego_start_speed_kmh = 72.0;
    s.lights.push(light(
        "L1",
        120.0,
        &[(LightColor::Red, 25.0), (LightColor::Green, 1000.0)],
    ));
    s
}

fn s5() -> ScenarioScript {
    let mut route = straight(400.0, LaneKind::Fast);
    route.adjacent_lane = AdjacentLane {
        side: Side::Right,
        kind: LaneKind::Normal,
    };
    let mut s = base(
        "S5",
        "law44",
        "A static obstacle blocks the fast lane; the free lane on the right is never used.",
        route,
        [300.0, 0.0],
    );
    s.ego_start_speed_kmh = 36.0;
    s.npcs.push(parked("obstacle", [100.0, 0.0], 0.0));
    s
}

fn s6() -> ScenarioScript {
    let mut s = base(
        "S6",
        "law46",
        "Dense fog; the ego keeps its usual cruise speed.",
        straight(400.0, LaneKind::Normal),
        [300.0, 0.0],
    );
    s.weather = Weather {
        fog: 0.8,
        visibility: 40.0,
        ..Weather::default()
    };
    s
}

fn s7() -> ScenarioScript {
    let mut route = straight(400.0, LaneKind::Normal);
    route.junctions.push(Span { start: 100.0, end: 130.0 });
    let mut s = base(
        "S7",
        "law53",
        "A queue stands inside the junction; the ego pulls in behind it and blocks the junction.",
        route,
        [250.0, 0.0],
    );
    let release_t = 60.0;
    for (i, x) in [112.0, 118.5, 124.5].into_iter().enumerate() {
        let mut npc = moving(&format!("queued{}", i + 1), [x, 0.0], [x + 300.0, 0.0], release_t, 36.0);
        npc.waypoints.insert(0, TimedWaypoint { t: 0.0, x, y: 0.0, speed: 0.0 });
        s.npcs.push(npc);
    }
    s
}

fn s8() -> ScenarioScript {
    let mut s = base(
        "S8",
        "finish_journey",
        "A stationary vehicle blocks the lane and the ego waits behind it indefinitely.",
        straight(400.0, LaneKind::Normal),
        [250.0, 0.0],
    );
    s.ego_start_speed_kmh = 36.0;
    s.npcs.push(parked("stalled", [80.0, 0.0], 0.0));
    s
}

/// The benchmark scenario with the given id (`S1` … `S8`).
pub fn scenario(id: &str) -> Option<ScenarioScript> {
    Some(match id {
        "S1" => s1(),
        "S2" => s2(),
        "S3" => s3(),
        "S4" => s4(),
        "S5" => s5(),
        "S6" => s6(),
        "S7" => s7(),
        "S8" => s8(),
        _ => return None,
    })
}

pub fn benchmark_suite() -> Vec<ScenarioScript> {
    SCENARIO_IDS.iter().filter_map(|id| scenario(id)).collect()
}

const REFERENCE_S1: &str = r#"rule "S1 rule1"
trigger
    always
condition
    obstacle_distance_leq(100)
then
    follow_dist(20)
    yield_dist(80)
    overtake_dist(30)
    obstacle_stop_dist(10)
    obstacle_decrease_ratio(1.5)
end

rule "S1 rule2"
trigger
    always
condition
    is_traffic_light(red)
    traffic_light_distance_leq(30)
then
    traffic_light_stop_dist(5)
end
"#;

const REFERENCE_S2: &str = r#"rule "Look further for oncoming traffic after a stop sign"
trigger
    approaching_stop_sign
then
    yield_dist(150)
    stop_sign_wait(4)
until
    exiting_junction
end
"#;

const REFERENCE_S3: &str = r#"rule "Approach signals slowly"
trigger
    always
condition
    traffic_light_distance_leq(120)
then
    cruise_speed(40)
    traffic_light_stop_dist(5)
end
"#;

const REFERENCE_S4: &str = r#"rule "Stop well before the line on red"
trigger
    always
condition
    is_traffic_light(red)
    traffic_light_distance_leq(100)
then
    traffic_light_stop_dist(5)
end
"#;

const REFERENCE_S5: &str = r#"rule "Leave a blocked fast lane"
trigger
    always
condition
    front_vehicle_closer_than(30)
then
    enable_lane_borrow(true)
    overtake_dist(40)
end
"#;

const REFERENCE_S6: &str = r#"rule "Slow down in fog"
trigger
    always
condition
    is_weather(fog)
then
    cruise_speed(25)
end
"#;

const REFERENCE_S7: &str = r#"rule "Wait outside a congested junction"
trigger
    always
condition
    junction_congested
    !in_junction
then
    obstacle_stop_dist(15)
end
"#;

const REFERENCE_S8: &str = r#"rule "Overtake a stationary vehicle"
trigger
    always
then
    enable_lane_borrow(true)
    overtake_dist(50)
end
"#;

/// Source text of the shipped repair for a benchmark scenario.
pub fn reference_repair_source(id: &str) -> Option<&'static str> {
    Some(match id {
        "S1" => REFERENCE_S1,
        "S2" => REFERENCE_S2,
        "S3" => REFERENCE_S3,
        "S4" => REFERENCE_S4,
        "S5" => REFERENCE_S5,
        "S6" => REFERENCE_S6,
        "S7" => REFERENCE_S7,
        "S8" => REFERENCE_S8,
        _ => return None,
    })
}

pub fn reference_repair(id: &str) -> Option<MuDriveProgram> {
    reference_repair_source(id).map(|src| parse_program(src).expect("reference repairs parse"))
}
