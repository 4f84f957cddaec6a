//! Shipped properties: the two generic driving properties and simplified encodings of
//! several road-traffic-law articles.

use super::ast::Formula;
use super::parser::parse_spec;

/// A named property with its source text and the prose used when prompting for repairs.
#[derive(Debug, Clone)]
pub struct BuiltinSpec {
    pub name: &'static str,
    pub text: &'static str,
    pub prose: &'static str,
}

impl BuiltinSpec {
    pub fn formula(&self) -> Formula {
        parse_spec(self.text).expect("builtin specs parse")
    }
}

pub const BUILTINS: &[BuiltinSpec] = &[
    BuiltinSpec {
        name: "no_collision",
        text: "G (!NearestNPC(0.1))",
        prose: "Avoid collisions with other objects.",
    },
    BuiltinSpec {
        name: "finish_journey",
        text: "G (F[0,200](speed > 0.5) | dest(5))",
        prose: "Do not stop on the road: keep making progress until the destination is reached.",
    },
    BuiltinSpec {
        name: "law38_green",
        text: "G ((trafficLightColor == green & stoplineAhead(2)) -> F[0,5](speed > 0.5))",
        prose: "Traffic law article 38: when the green light is on, vehicles are permitted to \
                pass the stop line.",
    },
    BuiltinSpec {
        name: "law38_yellow",
        text: "G ((trafficLightColor == yellow & stoplineAhead(2)) -> (stopped & !stoplineAhead(0)))",
        prose: "Traffic law article 38: when the yellow light is on, vehicles that have not yet \
                crossed the stop line must not proceed and must stop before the stop line.",
    },
    BuiltinSpec {
        name: "law38_red",
        text: "G ((trafficLightColor == red & stoplineAhead(2)) -> (stopped & !stoplineAhead(0)))",
        prose: "Traffic law article 38: when the red light is on, vehicles are prohibited from \
                passing and must stop before the stop line.",
    },
    BuiltinSpec {
        name: "law44",
        text: "G (laneKind == fast -> (F[0,200](speed > 0.5) | dest(5)))",
        prose: "Traffic law article 44: on a road with several lanes in one direction, a vehicle \
                in the fast lane must keep driving at the speed that lane requires and must not \
                stop in it.",
    },
    BuiltinSpec {
        name: "law46",
        text: "G ((fogIntensity > 0 | rainIntensity > 0 | snowIntensity > 0 | visibility < 50) -> speed <= 30)",
        prose: "Traffic law article 46: in fog, rain, snow, dust or hail, or when visibility is \
                within 50 metres, the speed must not exceed 30 kilometres per hour.",
    },
    BuiltinSpec {
        name: "law53",
        text: "G (junctionJam >= 3 -> !inJunction)",
        prose: "Traffic law article 53: when vehicles ahead are queued or moving slowly at an \
                intersection, do not enter the intersection; wait in turn.",
    },
];

pub fn builtin(name: &str) -> Option<&'static BuiltinSpec> {
    BUILTINS.iter().find(|b| b.name == name)
}
