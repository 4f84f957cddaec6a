//! JSONL driving records: one [`RawRecordFrame`] per line.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::TraceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gear {
    Drive,
    Reverse,
    Park,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleKind {
    Vehicle,
    Pedestrian,
    Cyclist,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightColor {
    Red,
    Yellow,
    Green,
    Off,
}

impl LightColor {
    /// Numeric code used when the colour appears inside a linear expression.
    pub fn code(self) -> f64 {
        match self {
            LightColor::Off => 0.0,
            LightColor::Green => 1.0,
            LightColor::Yellow => 2.0,
            LightColor::Red => 3.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LightColor::Red => "red",
            LightColor::Yellow => "yellow",
            LightColor::Green => "green",
            LightColor::Off => "off",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LaneKind {
    #[default]
    Normal,
    Fast,
    Slow,
}

impl LaneKind {
    pub fn code(self) -> f64 {
        match self {
            LaneKind::Normal => 0.0,
            LaneKind::Fast => 1.0,
            LaneKind::Slow => 2.0,
        }
    }
}

impl Gear {
    pub fn code(self) -> f64 {
        match self {
            Gear::Drive => 0.0,
            Gear::Reverse => 1.0,
            Gear::Park => 2.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gear::Drive => "drive",
            Gear::Reverse => "reverse",
            Gear::Park => "park",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    pub x: f64,
    pub y: f64,
    /// Radians, counter-clockwise from +x.
    pub heading: f64,
    /// km/h
    pub speed: f64,
    /// m/s²
    pub accel: f64,
    /// degrees
    pub steering: f64,
    pub gear: Gear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedPoint {
    pub t_rel: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub id: String,
    pub kind: ObstacleKind,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    /// km/h
    pub speed: f64,
    pub half_len: f64,
    pub half_wid: f64,
    #[serde(default)]
    pub predicted: Vec<PredictedPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficLightState {
    pub color: LightColor,
    /// Metres from the ego front bumper to the stop line; negative once crossed.
    pub dist_to_stopline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weather {
    pub rain: f64,
    pub fog: f64,
    pub snow: f64,
    /// metres
    pub visibility: f64,
}

impl Default for Weather {
    fn default() -> Self {
        Weather {
            rain: 0.0,
            fog: 0.0,
            snow: 0.0,
            visibility: 1000.0,
        }
    }
}

impl Weather {
    /// Anything worth telling a driver about: precipitation, fog, or visibility of 50 m or less.
    pub fn is_noteworthy(&self) -> bool {
        self.rain > 0.0 || self.fog > 0.0 || self.snow > 0.0 || self.visibility <= 50.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapContext {
    pub in_junction: bool,
    pub dist_to_junction: f64,
    pub lane_kind: LaneKind,
    pub dist_to_dest: f64,
    pub dist_to_stop_sign: f64,
    pub is_changing_lane: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecordFrame {
    pub t: f64,
    pub ego: EgoState,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub traffic_light: Option<TrafficLightState>,
    #[serde(default)]
    pub weather: Weather,
    pub map_ctx: MapContext,
}

impl RawRecordFrame {
    fn validate(&self, line: usize) -> Result<(), TraceError> {
        let bad = |msg: String| Err(TraceError::Validation { line, msg });
        if !(self.t >= 0.0) || !self.t.is_finite() {
            return bad(format!("t must be a finite non-negative number, got {}", self.t));
        }
        if !(self.ego.speed >= 0.0) {
            return bad(format!("ego speed must be >= 0, got {}", self.ego.speed));
        }
        if !(self.weather.visibility > 0.0) {
            return bad(format!(
                "visibility must be > 0, got {}",
                self.weather.visibility
            ));
        }
        for ob in &self.obstacles {
            if !(ob.half_len > 0.0 && ob.half_wid > 0.0) {
                return bad(format!("obstacle {} has non-positive box extents", ob.id));
            }
            if !(ob.speed >= 0.0) {
                return bad(format!("obstacle {} has negative speed", ob.id));
            }
        }
        Ok(())
    }
}

/// Names present in `raw` but dropped by the typed representation `typed`.
fn unknown_fields(raw: &Json, typed: &Json, path: &str, out: &mut Vec<String>) {
    match (raw, typed) {
        (Json::Object(r), Json::Object(t)) => {
            for (k, v) in r {
                let p = format!("{path}/{k}");
                match t.get(k) {
                    Some(tv) => unknown_fields(v, tv, &p, out),
                    None => out.push(p),
                }
            }
        }
        (Json::Array(r), Json::Array(t)) => {
            for (i, (rv, tv)) in r.iter().zip(t).enumerate() {
                unknown_fields(rv, tv, &format!("{path}/{i}"), out);
            }
        }
        _ => {}
    }
}

/// Parses JSONL text. Frames must already be strictly increasing in `t`.
pub fn parse_record(text: &str) -> Result<Vec<RawRecordFrame>, TraceError> {
    let mut frames: Vec<RawRecordFrame> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: Json = serde_json::from_str(line).map_err(|e| TraceError::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        let frame: RawRecordFrame =
            serde_json::from_value(raw.clone()).map_err(|e| TraceError::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
        let typed = serde_json::to_value(&frame).expect("frame serializes");
        let mut extra = Vec::new();
        unknown_fields(&raw, &typed, "", &mut extra);
        for path in extra {
            log::warn!("record line {lineno}: ignoring unknown field {path}");
        }
        frame.validate(lineno)?;
        if let Some(prev) = frames.last() {
            if frame.t <= prev.t {
                return Err(TraceError::Validation {
                    line: lineno,
                    msg: format!("t must be strictly increasing ({} after {})", frame.t, prev.t),
                });
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}

pub fn load_record(path: impl AsRef<Path>) -> Result<Vec<RawRecordFrame>, TraceError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| TraceError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    parse_record(&text)
}

/// Canonical JSONL encoding: one compact object per line, field order as declared.
pub fn record_to_string(frames: &[RawRecordFrame]) -> String {
    let mut out = String::new();
    for f in frames {
        out.push_str(&serde_json::to_string(f).expect("frame serializes"));
        out.push('\n');
    }
    out
}

pub fn save_record(path: impl AsRef<Path>, frames: &[RawRecordFrame]) -> Result<(), TraceError> {
    let path = path.as_ref();
    let io_err = |e: std::io::Error| TraceError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    };
    let mut file = fs::File::create(path).map_err(io_err)?;
    file.write_all(record_to_string(frames).as_bytes())
        .map_err(io_err)
}
