//! Scenes, traces and the signal-variable catalog.
//!
//! A [`Scene`] stores the numeric base quantities of one time step. Catalog variables that
//! take a distance argument (`NPCAhead(n)`, `NearestNPC(d)`, ...) are predicates over those
//! quantities and are evaluated on demand, so a scene never has to enumerate every argument.

mod record;

use std::fmt;

use thiserror::Error;

use crate::geometry::{to_body_frame, Obb, Vec2};

pub use record::{
    load_record, parse_record, record_to_string, save_record, EgoState, Gear, LaneKind,
    LightColor, MapContext, Obstacle, ObstacleKind, PredictedPoint, RawRecordFrame,
    TrafficLightState, Weather,
};

/// Ego bounding box half-length in metres (records do not carry ego dimensions).
pub const EGO_HALF_LEN: f64 = 2.4;
pub const EGO_HALF_WID: f64 = 0.95;
/// An obstacle is "ahead" when its lateral offset in the ego frame is below this.
pub const AHEAD_LATERAL: f64 = 2.0;
/// Distance reported when a feature (obstacle, stop line, sign) is absent.
pub const NO_FEATURE_DIST: f64 = 1000.0;
/// `stopped` holds while speed is below this many km/h.
pub const STOPPED_KMH: f64 = 0.5;
pub const DEFAULT_DT: f64 = 0.1;

const JAM_SPEED_KMH: f64 = 2.0;
const JAM_REGION_LEN: f64 = 25.0;
const JAM_LATERAL: f64 = 10.0;
const SENSING_RANGE: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("line {line}: parse error: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: invalid frame: {msg}")]
    Validation { line: usize, msg: String },
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("unknown signal variable `{0}`")]
    UnknownVariable(String),
    #[error("signal variable `{name}` {problem}")]
    BadArgument { name: String, problem: String },
    #[error("step {step} out of range for trace of length {len}")]
    OutOfRange { step: usize, len: usize },
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Numeric base quantities stored per scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Signal {
    Speed,
    Accel,
    IsOverTaking,
    IsChangingLane,
    NpcAheadDist,
    JunctionDist,
    StoplineDist,
    StopSignDist,
    NearestNpcDist,
    DestDist,
    TrafficLightColor,
    RainIntensity,
    FogIntensity,
    SnowIntensity,
    Visibility,
    InJunction,
    LaneKind,
    Gear,
    JunctionJam,
}

impl Signal {
    pub const COUNT: usize = 19;
    pub const ALL: [Signal; Signal::COUNT] = [
        Signal::Speed,
        Signal::Accel,
        Signal::IsOverTaking,
        Signal::IsChangingLane,
        Signal::NpcAheadDist,
        Signal::JunctionDist,
        Signal::StoplineDist,
        Signal::StopSignDist,
        Signal::NearestNpcDist,
        Signal::DestDist,
        Signal::TrafficLightColor,
        Signal::RainIntensity,
        Signal::FogIntensity,
        Signal::SnowIntensity,
        Signal::Visibility,
        Signal::InJunction,
        Signal::LaneKind,
        Signal::Gear,
        Signal::JunctionJam,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

/// How a catalog name maps onto the stored quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    /// Plain real-valued signal.
    Numeric(Signal),
    /// Boolean flag stored as 0/1.
    Flag(Signal),
    /// `name(n)`: true iff the stored distance is at most `n`.
    Within(Signal),
    /// Ego speed below [`STOPPED_KMH`].
    Stopped,
}

const CATALOG: &[(&str, VarKind)] = &[
    ("speed", VarKind::Numeric(Signal::Speed)),
    ("accel", VarKind::Numeric(Signal::Accel)),
    ("isOverTaking", VarKind::Flag(Signal::IsOverTaking)),
    ("isChangingLane", VarKind::Flag(Signal::IsChangingLane)),
    ("NPCAhead", VarKind::Within(Signal::NpcAheadDist)),
    ("junctionAhead", VarKind::Within(Signal::JunctionDist)),
    ("stoplineAhead", VarKind::Within(Signal::StoplineDist)),
    ("signAhead", VarKind::Within(Signal::StopSignDist)),
    ("NearestNPC", VarKind::Within(Signal::NearestNpcDist)),
    ("dest", VarKind::Within(Signal::DestDist)),
    ("trafficLightColor", VarKind::Numeric(Signal::TrafficLightColor)),
    ("rainIntensity", VarKind::Numeric(Signal::RainIntensity)),
    ("fogIntensity", VarKind::Numeric(Signal::FogIntensity)),
    ("snowIntensity", VarKind::Numeric(Signal::SnowIntensity)),
    ("visibility", VarKind::Numeric(Signal::Visibility)),
    ("inJunction", VarKind::Flag(Signal::InJunction)),
    ("laneKind", VarKind::Numeric(Signal::LaneKind)),
    ("gear", VarKind::Numeric(Signal::Gear)),
    ("junctionJam", VarKind::Numeric(Signal::JunctionJam)),
    ("stopped", VarKind::Stopped),
];

/// Enum literals usable inside expressions, e.g. `trafficLightColor == red`.
pub fn enum_literal(name: &str) -> Option<f64> {
    Some(match name {
        "off" => LightColor::Off.code(),
        "green" => LightColor::Green.code(),
        "yellow" => LightColor::Yellow.code(),
        "red" => LightColor::Red.code(),
        "normal" => LaneKind::Normal.code(),
        "fast" => LaneKind::Fast.code(),
        "slow" => LaneKind::Slow.code(),
        "drive" => Gear::Drive.code(),
        "reverse" => Gear::Reverse.code(),
        "park" => Gear::Park.code(),
        _ => return None,
    })
}

pub fn catalog_names() -> impl Iterator<Item = &'static str> {
    CATALOG.iter().map(|(n, _)| *n)
}

/// A catalog variable, optionally applied to a real argument.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalVar {
    pub name: String,
    pub arg: Option<f64>,
    kind: VarKind,
}

impl SignalVar {
    pub fn new(name: &str, arg: Option<f64>) -> Result<Self, TraceError> {
        let kind = CATALOG
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, k)| *k)
            .ok_or_else(|| TraceError::UnknownVariable(name.to_string()))?;
        match (kind, arg) {
            (VarKind::Within(_), None) => Err(TraceError::BadArgument {
                name: name.into(),
                problem: "requires a distance argument".into(),
            }),
            (VarKind::Within(_), Some(a)) if !a.is_finite() => Err(TraceError::BadArgument {
                name: name.into(),
                problem: "argument must be finite".into(),
            }),
            (VarKind::Numeric(_) | VarKind::Flag(_) | VarKind::Stopped, Some(_)) => {
                Err(TraceError::BadArgument {
                    name: name.into(),
                    problem: "takes no argument".into(),
                })
            }
            _ => Ok(SignalVar {
                name: name.to_string(),
                arg,
                kind,
            }),
        }
    }

    pub fn kind(&self) -> VarKind {
        self.kind
    }
}

impl fmt::Display for SignalVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.arg {
            Some(a) => write!(f, "{}({})", self.name, a),
            None => write!(f, "{}", self.name),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Real(f64),
    Bool(bool),
}

impl Value {
    pub fn as_f64(self) -> f64 {
        match self {
            Value::Real(v) => v,
            Value::Bool(b) => f64::from(u8::from(b)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    values: [f64; Signal::COUNT],
}

impl Scene {
    pub fn get(&self, s: Signal) -> f64 {
        self.values[s.index()]
    }

    pub fn set(&mut self, s: Signal, v: f64) {
        self.values[s.index()] = v;
    }

    pub fn flag(&self, s: Signal) -> bool {
        self.get(s) > 0.5
    }

    pub fn stopped(&self) -> bool {
        self.get(Signal::Speed) < STOPPED_KMH
    }

    pub fn value(&self, var: &SignalVar) -> Value {
        match var.kind {
            VarKind::Numeric(s) => Value::Real(self.get(s)),
            VarKind::Flag(s) => Value::Bool(self.flag(s)),
            VarKind::Within(s) => Value::Bool(self.get(s) <= var.arg.unwrap_or(0.0)),
            VarKind::Stopped => Value::Bool(self.stopped()),
        }
    }

    /// Scene with every quantity at its "nothing around" value.
    pub fn empty() -> Self {
        let mut sc = Scene {
            values: [0.0; Signal::COUNT],
        };
        for s in [
            Signal::NpcAheadDist,
            Signal::JunctionDist,
            Signal::StoplineDist,
            Signal::StopSignDist,
            Signal::NearestNpcDist,
            Signal::DestDist,
            Signal::Visibility,
        ] {
            sc.set(s, NO_FEATURE_DIST);
        }
        sc
    }

    pub fn from_frame(frame: &RawRecordFrame) -> Self {
        let mut sc = Scene::empty();
        let ego = &frame.ego;
        let ctx = &frame.map_ctx;
        let b = |v: bool| f64::from(u8::from(v));
        sc.set(Signal::Speed, ego.speed);
        sc.set(Signal::Accel, ego.accel);
        sc.set(Signal::IsChangingLane, b(ctx.is_changing_lane));
        sc.set(Signal::JunctionDist, ctx.dist_to_junction);
        sc.set(Signal::StopSignDist, ctx.dist_to_stop_sign);
        sc.set(Signal::DestDist, ctx.dist_to_dest);
        sc.set(Signal::InJunction, b(ctx.in_junction));
        sc.set(Signal::LaneKind, ctx.lane_kind.code());
        sc.set(Signal::Gear, ego.gear.code());
        sc.set(Signal::RainIntensity, frame.weather.rain);
        sc.set(Signal::FogIntensity, frame.weather.fog);
        sc.set(Signal::SnowIntensity, frame.weather.snow);
        sc.set(Signal::Visibility, frame.weather.visibility);
        match &frame.traffic_light {
            Some(tl) => {
                sc.set(Signal::TrafficLightColor, tl.color.code());
                sc.set(Signal::StoplineDist, tl.dist_to_stopline);
            }
            None => sc.set(Signal::TrafficLightColor, LightColor::Off.code()),
        }

        let origin = Vec2::new(ego.x, ego.y);
        let ego_box = Obb::new(ego.x, ego.y, ego.heading, EGO_HALF_LEN, EGO_HALF_WID);
        let mut ahead = NO_FEATURE_DIST;
        let mut nearest = NO_FEATURE_DIST;
        let mut overtaking = false;
        let mut jam = 0u32;
        let jam_from = ctx.dist_to_junction.max(0.0);
        for ob in &frame.obstacles {
            let (lon, lat) = to_body_frame(origin, ego.heading, Vec2::new(ob.x, ob.y));
            let center_dist = lon.hypot(lat);
            if lon > 0.0 && lat.abs() < AHEAD_LATERAL {
                ahead = ahead.min(center_dist);
            }
            let ob_box = Obb::new(ob.x, ob.y, ob.heading, ob.half_len, ob.half_wid);
            nearest = nearest.min(ego_box.distance(&ob_box));
            if (AHEAD_LATERAL..=6.0).contains(&lat.abs())
                && lon.abs() < ob.half_len + EGO_HALF_LEN + 5.0
                && ego.speed > ob.speed + 1.0
            {
                overtaking = true;
            }
            let front_off = lon - EGO_HALF_LEN;
            if ob.speed < JAM_SPEED_KMH
                && center_dist <= SENSING_RANGE
                && lat.abs() < JAM_LATERAL
                && front_off >= jam_from
                && front_off <= jam_from + JAM_REGION_LEN
            {
                jam += 1;
            }
        }
        sc.set(Signal::NpcAheadDist, ahead);
        sc.set(Signal::NearestNpcDist, nearest);
        sc.set(Signal::IsOverTaking, b(overtaking));
        sc.set(Signal::JunctionJam, f64::from(jam));
        sc
    }
}

/// Scenes sampled at a constant step `dt`; scene `i` corresponds to time `i * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    scenes: Vec<Scene>,
    dt: f64,
}

impl Trace {
    pub fn new(scenes: Vec<Scene>, dt: f64) -> Result<Self, TraceError> {
        if scenes.is_empty() {
            return Err(TraceError::Argument("trace must contain at least one scene".into()));
        }
        if !(dt > 0.0) {
            return Err(TraceError::Argument(format!("dt must be > 0, got {dt}")));
        }
        Ok(Trace { scenes, dt })
    }

    /// Trace over a single numeric signal, every other quantity at its empty value.
    pub fn from_signal(signal: Signal, values: &[f64], dt: f64) -> Result<Self, TraceError> {
        let scenes = values
            .iter()
            .map(|&v| {
                let mut sc = Scene::empty();
                sc.set(signal, v);
                sc
            })
            .collect();
        Trace::new(scenes, dt)
    }

    pub fn len(&self) -> usize {
        self.scenes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn scenes(&self) -> &[Scene] {
        &self.scenes
    }

    pub fn scene(&self, t: usize) -> Result<&Scene, TraceError> {
        self.scenes.get(t).ok_or(TraceError::OutOfRange {
            step: t,
            len: self.len(),
        })
    }

    /// Copy holding only the first `len` scenes.
    pub fn truncated(&self, len: usize) -> Result<Trace, TraceError> {
        if len == 0 || len > self.len() {
            return Err(TraceError::OutOfRange {
                step: len,
                len: self.len(),
            });
        }
        Trace::new(self.scenes[..len].to_vec(), self.dt)
    }
}

/// Resamples frames at spacing `dt` (nearest frame, ties to the earlier one) and evaluates
/// every catalog quantity per step.
pub fn build_trace(frames: &[RawRecordFrame], dt: f64) -> Result<Trace, TraceError> {
    if !(dt > 0.0) {
        return Err(TraceError::Argument(format!("dt must be > 0, got {dt}")));
    }
    let (first, last) = match (frames.first(), frames.last()) {
        (Some(f), Some(l)) => (f.t, l.t),
        _ => return Err(TraceError::Argument("no frames".into())),
    };
    let steps = ((last - first) / dt + 1e-9).floor() as usize + 1;
    let mut scenes = Vec::with_capacity(steps);
    let mut j = 0;
    for i in 0..steps {
        let t = first + i as f64 * dt;
        while j + 1 < frames.len() && (frames[j + 1].t - t).abs() < (frames[j].t - t).abs() - 1e-9
        {
            j += 1;
        }
        scenes.push(Scene::from_frame(&frames[j]));
    }
    Trace::new(scenes, dt)
}

/// Index of the frame whose timestamp is nearest to `t`.
pub fn nearest_frame(frames: &[RawRecordFrame], t: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, f) in frames.iter().enumerate() {
        let d = (f.t - t).abs();
        if best.is_none_or(|(_, bd)| d < bd - 1e-12) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

pub fn scene_value(trace: &Trace, var: &SignalVar, t: usize) -> Result<Value, TraceError> {
    Ok(trace.scene(t)?.value(var))
}
