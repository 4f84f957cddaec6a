//! Driving-quality metrics over a record.

use serde::{Deserialize, Serialize};

use crate::trace::{RawRecordFrame, Scene, Signal, DEFAULT_DT, STOPPED_KMH};

pub const EGO_MASS_KG: f64 = 1500.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMetrics {
    pub avg_speed_kmh: f64,
    pub max_speed_kmh: f64,
    /// Mean and maximum of |accel|, m/s².
    pub avg_accel: f64,
    pub max_accel: f64,
    /// Over frames that contain at least one obstacle.
    pub avg_obstacle_dist: Option<f64>,
    pub min_obstacle_dist: Option<f64>,
    pub stop_time_s: f64,
    /// `Σ ½ m (v_{t+1}² − v_t²)` over consecutive frames, speeds in m/s.
    pub energy_j: f64,
    /// The same sum restricted to positive terms.
    pub energy_positive_j: f64,
}

/// Metrics over `frames`; `None` when there are no frames.
pub fn evaluate_trace(frames: &[RawRecordFrame]) -> Option<TraceMetrics> {
    if frames.is_empty() {
        return None;
    }
    let n = frames.len() as f64;
    let dt = match frames {
        [a, b, ..] => b.t - a.t,
        _ => DEFAULT_DT,
    };
    let speeds: Vec<f64> = frames.iter().map(|f| f.ego.speed).collect();
    let accels: Vec<f64> = frames.iter().map(|f| f.ego.accel.abs()).collect();
    let dists: Vec<f64> = frames
        .iter()
        .filter(|f| !f.obstacles.is_empty())
        .map(|f| Scene::from_frame(f).get(Signal::NearestNpcDist))
        .collect();
    let mut energy = 0.0;
    let mut positive = 0.0;
    for w in speeds.windows(2) {
        let (v0, v1) = (w[0] / 3.6, w[1] / 3.6);
        let term = 0.5 * EGO_MASS_KG * (v1 * v1 - v0 * v0);
        energy += term;
        positive += term.max(0.0);
    }
    Some(TraceMetrics {
        avg_speed_kmh: speeds.iter().sum::<f64>() / n,
        max_speed_kmh: speeds.iter().copied().fold(0.0, f64::max),
        avg_accel: accels.iter().sum::<f64>() / n,
        max_accel: accels.iter().copied().fold(0.0, f64::max),
        avg_obstacle_dist: (!dists.is_empty()).then(|| dists.iter().sum::<f64>() / dists.len() as f64),
        min_obstacle_dist: dists.iter().copied().reduce(f64::min),
        stop_time_s: speeds.iter().filter(|&&v| v < STOPPED_KMH).count() as f64 * dt,
        energy_j: energy,
        energy_positive_j: positive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{EgoState, Gear, LaneKind, MapContext, Weather, NO_FEATURE_DIST};

    fn frame(t: f64, kmh: f64) -> RawRecordFrame {
        RawRecordFrame {
            t,
            ego: EgoState {
                x: 0.0,
                y: 0.0,
                heading: 0.0,
                speed: kmh,
                accel: 0.0,
                steering: 0.0,
                gear: Gear::Drive,
            },
            obstacles: vec![],
            traffic_light: None,
            weather: Weather::default(),
            map_ctx: MapContext {
                in_junction: false,
                dist_to_junction: NO_FEATURE_DIST,
                lane_kind: LaneKind::Normal,
                dist_to_dest: NO_FEATURE_DIST,
                dist_to_stop_sign: NO_FEATURE_DIST,
                is_changing_lane: false,
            },
        }
    }

    #[test]
    fn constant_speed_uses_no_energy() {
        let frames: Vec<_> = (0..10).map(|i| frame(i as f64 * 0.1, 40.0)).collect();
        let m = evaluate_trace(&frames).unwrap();
        assert_eq!(m.energy_j, 0.0);
        assert_eq!(m.stop_time_s, 0.0);
        assert_eq!(m.min_obstacle_dist, None);
    }

    #[test]
    fn accelerate_then_brake() {
        let frames = [frame(0.0, 0.0), frame(0.1, 36.0), frame(0.2, 0.0)];
        let m = evaluate_trace(&frames).unwrap();
        assert!(m.energy_j.abs() < 1e-9);
        assert!((m.energy_positive_j - 75_000.0).abs() < 1e-6);
        assert!((m.stop_time_s - 0.2).abs() < 1e-12);
    }

    #[test]
    fn single_frame_stop_time() {
        assert_eq!(evaluate_trace(&[frame(0.0, 0.0)]).unwrap().stop_time_s, DEFAULT_DT);
        assert_eq!(evaluate_trace(&[frame(0.0, 5.0)]).unwrap().stop_time_s, 0.0);
        assert!(evaluate_trace(&[]).is_none());
    }
}
