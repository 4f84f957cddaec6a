//! Offline backend: deterministic template selection from prompt metadata and scene features.
//!
//! The template family is chosen from the property name, the weather segment and the
//! scene summaries embedded in the two images; the seed picks one variant of the family.
//! Token usage is the character-count surrogate of everything sent and returned.

use serde_json::Value;

use super::{surrogate_tokens, Backend, BackendKind, ChatRequest, ChatResponse, RepairError, TokenUsage};
use crate::mudrive::{parse_program, to_json, VocabularyCatalog};
use crate::promptgen::{MomentFeatures, ObstacleBand, SegmentKind};

/// Deliberate defects for exercising the retry path; applied to first attempts only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MockFault {
    #[default]
    None,
    /// First answer has a rule without actions.
    EmptyActions,
    /// First answer is not JSON.
    Malformed,
    /// Every answer has a rule without actions.
    AlwaysEmptyActions,
}

#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    pub fault: MockFault,
}

impl MockBackend {
    pub fn new() -> Self {
        MockBackend::default()
    }

    pub fn with_fault(fault: MockFault) -> Self {
        MockBackend { fault }
    }
}

/// Template family for a prompt; each family holds up to three variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Family {
    JunctionYield,
    CloseRangeBraking,
    DistantFollowing,
    StopSignYield,
    YellowApproach,
    RedStopLine,
    GreenProceed,
    LeaveFastLane,
    Weather(&'static str),
    LowVisibility,
    CongestedJunction,
    Overtake,
    Generic,
}

pub(crate) fn select_family(spec: &str, weather: &str, near: &MomentFeatures, viol: &MomentFeatures) -> Family {
    match spec {
        "no_collision" => {
            if near.stop_sign || viol.stop_sign {
                return Family::StopSignYield;
            }
            match near.obstacle_band {
                ObstacleBand::Mid => Family::JunctionYield,
                ObstacleBand::Near => Family::CloseRangeBraking,
                ObstacleBand::Far | ObstacleBand::None => Family::DistantFollowing,
            }
        }
        "law38_yellow" => Family::YellowApproach,
        "law38_red" => Family::RedStopLine,
        "law38_green" => Family::GreenProceed,
        "law44" => Family::LeaveFastLane,
        "law46" => ["fog", "rain", "snow"]
            .into_iter()
            .find(|k| weather.contains(k))
            .map_or(Family::LowVisibility, Family::Weather),
        "law53" => Family::CongestedJunction,
        "finish_journey" if near.front_static_vehicle || viol.front_static_vehicle => Family::Overtake,
        _ => Family::Generic,
    }
}

fn variants(f: Family) -> Vec<String> {
    let v = |s: &str| s.to_string();
    match f {
        Family::JunctionYield => [(80, "1.5", 10), (90, "1.5", 12), (100, "2", 10)]
            .iter()
            .map(|(y, r, d)| {
                format!(
                    "rule \"Proximity caution\" trigger always condition obstacle_distance_leq(100) \
                     then follow_dist(20) yield_dist({y}) overtake_dist(30) obstacle_stop_dist({d}) \
                     obstacle_decrease_ratio({r}) end\n\
                     rule \"Red light stop\" trigger always condition is_traffic_light(red) \
                     traffic_light_distance_leq(30) then traffic_light_stop_dist(5) end"
                )
            })
            .collect(),
        Family::CloseRangeBraking => vec![
            v("rule \"Brake hard when close\" trigger always condition obstacle_distance_leq(5) \
               then obstacle_decrease_ratio(2) obstacle_stop_dist(3) end"),
            v("rule \"Keep distance when close\" trigger always condition front_vehicle_closer_than(8) \
               then follow_dist(12) obstacle_stop_dist(5) end"),
        ],
        Family::DistantFollowing => vec![
            v("rule \"Keep a longer gap\" trigger always condition front_vehicle_closer_than(40) \
               then follow_dist(25) end"),
            v("rule \"Overtake later\" trigger always condition obstacle_distance_leq(30) \
               then overtake_dist(60) follow_dist(20) end"),
        ],
        Family::StopSignYield => [(150, 4), (120, 6), (200, 3)]
            .iter()
            .map(|(y, w)| {
                format!(
                    "rule \"Check oncoming traffic at the stop sign\" trigger approaching_stop_sign \
                     then yield_dist({y}) stop_sign_wait({w}) until exiting_junction end"
                )
            })
            .collect(),
        Family::YellowApproach => [(120, 40, 5), (120, 35, 6), (150, 45, 5)]
            .iter()
            .map(|(d, v, s)| {
                format!(
                    "rule \"Approach signals slowly\" trigger always condition traffic_light_distance_leq({d}) \
                     then cruise_speed({v}) traffic_light_stop_dist({s}) end"
                )
            })
            .collect(),
        Family::RedStopLine => [(100, "5"), (120, "6"), (100, "5.5")]
            .iter()
            .map(|(d, s)| {
                format!(
                    "rule \"Stop before the line on red\" trigger always condition is_traffic_light(red) \
                     traffic_light_distance_leq({d}) then traffic_light_stop_dist({s}) end"
                )
            })
            .collect(),
        Family::GreenProceed => vec![v(
            "rule \"Move off on green\" trigger always condition is_traffic_light(green) \
             then stop_sign_wait(0) end",
        )],
        Family::LeaveFastLane => [40, 50, 30]
            .iter()
            .map(|o| {
                format!(
                    "rule \"Leave a blocked fast lane\" trigger always condition front_vehicle_closer_than(30) \
                     then enable_lane_borrow(true) overtake_dist({o}) end"
                )
            })
            .collect(),
        Family::Weather(kind) => [28, 25, 20]
            .iter()
            .map(|s| {
                format!(
                    "rule \"Slow down in {kind}\" trigger always condition is_weather({kind}) \
                     then cruise_speed({s}) end"
                )
            })
            .collect(),
        Family::LowVisibility => [28, 25]
            .iter()
            .map(|s| {
                format!(
                    "rule \"Slow down when visibility is poor\" trigger always condition visibility_leq(50) \
                     then cruise_speed({s}) end"
                )
            })
            .collect(),
        Family::CongestedJunction => [15, 18, 20]
            .iter()
            .map(|d| {
                format!(
                    "rule \"Wait outside a congested junction\" trigger always condition junction_congested \
                     !in_junction then obstacle_stop_dist({d}) end"
                )
            })
            .collect(),
        Family::Overtake => [50, 40, 60]
            .iter()
            .map(|o| {
                format!(
                    "rule \"Overtake a stationary vehicle\" trigger always \
                     then enable_lane_borrow(true) overtake_dist({o}) end"
                )
            })
            .collect(),
        Family::Generic => vec![v(
            "rule \"Drive cautiously\" trigger always condition obstacle_distance_leq(20) \
             then cruise_speed(30) follow_dist(20) end",
        )],
    }
}

/// Function-call arguments for a bundle and seed, before any fault is applied.
pub(crate) fn template_arguments(req: &ChatRequest<'_>) -> Result<Value, RepairError> {
    let bundle = req.bundle;
    let features = |i: usize| {
        MomentFeatures::from_svg(&bundle.images[i])
            .ok_or_else(|| RepairError::Backend(format!("image {i} carries no scene summary")))
    };
    let (near, viol) = (features(0)?, features(1)?);
    let weather = bundle.segment(SegmentKind::Weather).unwrap_or("");
    let family = select_family(&bundle.meta.spec_name, weather, &near, &viol);
    let vs = variants(family);
    let src = &vs[(req.seed % vs.len() as u64) as usize];
    let program = parse_program(src).map_err(|e| RepairError::Backend(format!("template: {e}")))?;
    to_json(&program, &VocabularyCatalog::standard())
        .map_err(|e| RepairError::Backend(format!("template: {e}")))
}

impl Backend for MockBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Mock
    }

    fn complete(&self, req: &ChatRequest<'_>) -> Result<ChatResponse, RepairError> {
        let first = req.corrections.is_empty();
        let mut doc = template_arguments(req)?;
        let arguments = match self.fault {
            MockFault::Malformed if first => "{\"rules\": [".to_string(),
            MockFault::EmptyActions if first => {
                doc["rules"][0]["actions"] = Value::Array(vec![]);
                doc.to_string()
            }
            MockFault::AlwaysEmptyActions => {
                doc["rules"][0]["actions"] = Value::Array(vec![]);
                doc.to_string()
            }
            _ => doc.to_string(),
        };
        let mut sent = req.bundle.text();
        for img in &req.bundle.images {
            sent.push_str(img);
        }
        sent.push_str(&req.tool_schema.to_string());
        for c in req.corrections {
            sent.push_str(&c.arguments);
            sent.push_str(&c.message());
        }
        Ok(ChatResponse {
            call_id: format!("call_{}_{}", req.seed, req.corrections.len()),
            usage: TokenUsage {
                input: surrogate_tokens(&sent),
                output: surrogate_tokens(&arguments),
            },
            arguments,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_variant_is_valid() {
        let cat = VocabularyCatalog::standard();
        let families = [
            Family::JunctionYield,
            Family::CloseRangeBraking,
            Family::DistantFollowing,
            Family::StopSignYield,
            Family::YellowApproach,
            Family::RedStopLine,
            Family::GreenProceed,
            Family::LeaveFastLane,
            Family::Weather("fog"),
            Family::Weather("rain"),
            Family::Weather("snow"),
            Family::LowVisibility,
            Family::CongestedJunction,
            Family::Overtake,
            Family::Generic,
        ];
        for f in families {
            let vs = variants(f);
            assert!((1..=3).contains(&vs.len()));
            for src in vs {
                let p = parse_program(&src).unwrap_or_else(|e| panic!("{f:?}: {e}"));
                assert!(crate::mudrive::validate(&p, &cat).is_empty(), "{f:?}");
            }
        }
    }

    #[test]
    fn family_selection() {
        let feat = |band, stop_sign, front_static_vehicle| MomentFeatures {
            light: None,
            obstacle_band: band,
            in_junction: false,
            front_static_vehicle,
            stop_sign,
        };
        let mid = feat(ObstacleBand::Mid, false, false);
        let near = feat(ObstacleBand::Near, false, false);
        assert_eq!(select_family("no_collision", "", &mid, &near), Family::JunctionYield);
        assert_eq!(select_family("no_collision", "", &near, &near), Family::CloseRangeBraking);
        let far = feat(ObstacleBand::Far, false, false);
        assert_eq!(select_family("no_collision", "", &far, &near), Family::DistantFollowing);
        let sign = feat(ObstacleBand::Mid, true, false);
        assert_eq!(select_family("no_collision", "", &mid, &sign), Family::StopSignYield);
        assert_eq!(
            select_family("law46", "Current weather: fog with intensity 0.8; visibility is 40 metres.", &mid, &mid),
            Family::Weather("fog")
        );
        let stuck = feat(ObstacleBand::Near, false, true);
        assert_eq!(select_family("finish_journey", "", &stuck, &stuck), Family::Overtake);
        assert_eq!(select_family("finish_journey", "", &mid, &mid), Family::Generic);
    }
}
