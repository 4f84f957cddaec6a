//! Vocabulary of events, conditions and actions with descriptions and units.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Event,
    Condition,
    Action,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParamType {
    Real { unit: String, min: f64, max: f64 },
    Enum { values: Vec<String> },
    Bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Param {
    pub name: String,
    pub description: String,
    pub ty: ParamType,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Entry {
    pub name: String,
    pub description: String,
    pub params: Vec<Param>,
}

fn real(name: &str, unit: &str, min: f64, max: f64, description: &str) -> Param {
    Param {
        name: name.into(),
        description: description.into(),
        ty: ParamType::Real {
            unit: unit.into(),
            min,
            max,
        },
    }
}

fn choice(name: &str, values: &[&str], description: &str) -> Param {
    Param {
        name: name.into(),
        description: description.into(),
        ty: ParamType::Enum {
            values: values.iter().map(|v| v.to_string()).collect(),
        },
    }
}

fn flag(name: &str, description: &str) -> Param {
    Param {
        name: name.into(),
        description: description.into(),
        ty: ParamType::Bool,
    }
}

fn entry(name: &str, description: &str, params: Vec<Param>) -> Entry {
    Entry {
        name: name.into(),
        description: description.into(),
        params,
    }
}

/// Closed registry of vocabulary; [`VocabularyCatalog::register`] extends it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VocabularyCatalog {
    pub events: Vec<Entry>,
    pub conditions: Vec<Entry>,
    pub actions: Vec<Entry>,
}

pub const MAX_DIST_M: f64 = 500.0;

impl Default for VocabularyCatalog {
    fn default() -> Self {
        VocabularyCatalog::standard()
    }
}

impl VocabularyCatalog {
    pub fn standard() -> Self {
        let dist = |d: &str| real("distance_m", "m", 0.0, MAX_DIST_M, d);
        let events = vec![
            entry(
                "entering_junction",
                "Fires once when the front of the vehicle enters a junction area.",
                vec![],
            ),
            entry(
                "exiting_junction",
                "Fires once when the front of the vehicle leaves a junction area.",
                vec![],
            ),
            entry(
                "approaching_stop_sign",
                "Fires once when a stop sign on the route comes within 30 metres.",
                vec![],
            ),
            entry(
                "approaching_crosswalk",
                "Fires once when the crossing area at the next junction comes within 30 metres.",
                vec![],
            ),
            entry(
                "episode_start",
                "Fires on the first planning cycle of a drive.",
                vec![],
            ),
        ];
        let conditions = vec![
            entry(
                "is_traffic_light",
                "True when the traffic light governing the vehicle's lane shows the given colour.",
                vec![choice("color", &["red", "yellow", "green"], "Light colour to test for.")],
            ),
            entry(
                "traffic_light_distance_leq",
                "True when the stop line of the upcoming traffic light is at most the given distance from the front of the vehicle.",
                vec![dist("Distance to the stop line.")],
            ),
            entry(
                "obstacle_distance_leq",
                "True when the closest obstacle of any kind is at most the given distance away (box to box).",
                vec![dist("Distance to the nearest obstacle.")],
            ),
            entry(
                "front_vehicle_closer_than",
                "True when an obstacle in the vehicle's own lane ahead is closer than the given distance (centre to centre).",
                vec![dist("Distance to the obstacle ahead.")],
            ),
            entry(
                "speed_gt",
                "True when the vehicle's speed is greater than the given value.",
                vec![real("speed_kmh", "km/h", 0.0, 200.0, "Speed threshold.")],
            ),
            entry(
                "speed_leq",
                "True when the vehicle's speed is at most the given value.",
                vec![real("speed_kmh", "km/h", 0.0, 200.0, "Speed threshold.")],
            ),
            entry(
                "is_weather",
                "True when the given kind of weather is present with non-zero intensity.",
                vec![choice("kind", &["rain", "fog", "snow"], "Weather kind.")],
            ),
            entry(
                "visibility_leq",
                "True when visibility is at most the given distance.",
                vec![dist("Visibility threshold.")],
            ),
            entry(
                "in_junction",
                "True while the front of the vehicle is inside a junction area.",
                vec![],
            ),
            entry(
                "junction_congested",
                "True when at least three nearly stationary vehicles occupy the junction area ahead.",
                vec![],
            ),
        ];
        let actions = vec![
            entry(
                "cruise_speed",
                "Sets the maximum planning speed the vehicle cruises at.",
                vec![real("speed_kmh", "km/h", 0.0, 120.0, "Cruise speed.")],
            ),
            entry(
                "follow_dist",
                "Sets the gap kept behind a moving vehicle ahead in the same lane.",
                vec![real("distance_m", "m", 0.0, 200.0, "Following gap.")],
            ),
            entry(
                "yield_dist",
                "Sets how far along its path a crossing vehicle may be from the vehicle's lane before the vehicle yields to it.",
                vec![real("distance_m", "m", 0.0, 200.0, "Yield look-ahead distance.")],
            ),
            entry(
                "overtake_dist",
                "Sets the clear length the neighbouring lane must offer ahead before the vehicle borrows it to pass.",
                vec![real("distance_m", "m", 0.0, 200.0, "Required clear length.")],
            ),
            entry(
                "obstacle_stop_dist",
                "Sets the gap kept when stopping behind a stationary obstacle.",
                vec![real("distance_m", "m", 0.0, 200.0, "Stopping gap.")],
            ),
            entry(
                "obstacle_decrease_ratio",
                "Scales how hard the vehicle may brake and accelerate (1 is nominal, 2 doubles the limit).",
                vec![real("ratio", "dimensionless", 0.0, 2.0, "Acceleration limit multiplier.")],
            ),
            entry(
                "traffic_light_stop_dist",
                "Sets how far before the stop line the vehicle centre stops for a red or yellow light.",
                vec![real("distance_m", "m", 0.0, 200.0, "Stop distance from the stop line.")],
            ),
            entry(
                "stop_sign_wait",
                "Sets how long the vehicle waits after stopping at a stop sign.",
                vec![real("seconds", "s", 0.0, 60.0, "Waiting time.")],
            ),
            entry(
                "enable_lane_borrow",
                "Allows or forbids temporarily borrowing the neighbouring lane to pass a blocking obstacle.",
                vec![flag("enabled", "Whether lane borrowing is allowed.")],
            ),
        ];
        VocabularyCatalog {
            events,
            conditions,
            actions,
        }
    }

    pub fn entries(&self, kind: EntryKind) -> &[Entry] {
        match kind {
            EntryKind::Event => &self.events,
            EntryKind::Condition => &self.conditions,
            EntryKind::Action => &self.actions,
        }
    }

    pub fn lookup(&self, kind: EntryKind, name: &str) -> Option<&Entry> {
        self.entries(kind).iter().find(|e| e.name == name)
    }

    /// Adds or replaces an entry. Entries without built-in runtime semantics are accepted
    /// by the validator and ignored by the interpreter.
    pub fn register(&mut self, kind: EntryKind, e: Entry) {
        let list = match kind {
            EntryKind::Event => &mut self.events,
            EntryKind::Condition => &mut self.conditions,
            EntryKind::Action => &mut self.actions,
        };
        match list.iter_mut().find(|x| x.name == e.name) {
            Some(slot) => *slot = e,
            None => list.push(e),
        }
    }
}

impl ParamType {
    /// Unit string used in schema descriptions.
    pub fn unit(&self) -> &str {
        match self {
            ParamType::Real { unit, .. } => unit,
            ParamType::Enum { .. } => "enumeration",
            ParamType::Bool => "boolean",
        }
    }
}
