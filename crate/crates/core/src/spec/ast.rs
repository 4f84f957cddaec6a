use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::trace::{Scene, Signal, STOPPED_KMH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl Cmp {
    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
            Cmp::Eq => "==",
            Cmp::Ne => "!=",
        }
    }

    /// Boolean verdict of `f ~ 0`.
    pub fn holds(self, f: f64) -> bool {
        match self {
            Cmp::Lt => f < 0.0,
            Cmp::Le => f <= 0.0,
            Cmp::Gt => f > 0.0,
            Cmp::Ge => f >= 0.0,
            Cmp::Eq => f == 0.0,
            Cmp::Ne => f != 0.0,
        }
    }

    /// Robustness of `f ~ 0` given the valuation of `f`.
    pub fn robustness(self, f: f64) -> f64 {
        match self {
            Cmp::Lt | Cmp::Le => -f,
            Cmp::Gt | Cmp::Ge => f,
            Cmp::Ne => f.abs(),
            Cmp::Eq => -f.abs(),
        }
    }
}

/// `Σ coeff·signal + constant`, terms kept sorted by signal with non-zero coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinExpr {
    terms: Vec<(Signal, f64)>,
    constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn signal(s: Signal) -> Self {
        LinExpr {
            terms: vec![(s, 1.0)],
            constant: 0.0,
        }
    }

    pub fn terms(&self) -> &[(Signal, f64)] {
        &self.terms
    }

    pub fn constant_term(&self) -> f64 {
        self.constant
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scaled(mut self, k: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= k;
        }
        self.constant *= k;
        self.terms.retain(|t| t.1 != 0.0);
        self
    }

    pub fn plus(mut self, other: LinExpr) -> Self {
        for (s, c) in other.terms {
            match self.terms.binary_search_by(|t| t.0.cmp(&s)) {
                Ok(i) => self.terms[i].1 += c,
                Err(i) => self.terms.insert(i, (s, c)),
            }
        }
        self.terms.retain(|t| t.1 != 0.0);
        self.constant += other.constant;
        self
    }

    pub fn minus(self, other: LinExpr) -> Self {
        self.plus(other.scaled(-1.0))
    }

    pub fn eval(&self, scene: &Scene) -> f64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(s, c)| acc + c * scene.get(s))
    }
}

/// Time interval in seconds; `hi` may be `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const UNBOUNDED: Interval = Interval {
        lo: 0.0,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Option<Self> {
        (lo >= 0.0 && lo <= hi && lo.is_finite()).then_some(Interval { lo, hi })
    }

    /// Step offsets covered by this interval at sampling period `dt`: `(lo, hi)`, with
    /// `hi == None` meaning unbounded. The step window may be empty (`lo > hi`).
    pub fn steps(&self, dt: f64) -> (usize, Option<usize>) {
        let lo = (self.lo / dt - 1e-9).ceil().max(0.0) as usize;
        let hi = self
            .hi
            .is_finite()
            .then(|| (self.hi / dt + 1e-9).floor().max(0.0) as usize);
        (lo, hi)
    }

    pub fn is_unbounded(&self) -> bool {
        self.lo == 0.0 && self.hi.is_infinite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Const(bool),
    /// `expr ~ 0`
    Prop { expr: LinExpr, cmp: Cmp },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Until(Interval, Box<Formula>, Box<Formula>),
    Eventually(Interval, Box<Formula>),
    Always(Interval, Box<Formula>),
    Next(Box<Formula>),
}

impl Formula {
    pub fn prop(expr: LinExpr, cmp: Cmp) -> Formula {
        Formula::Prop { expr, cmp }
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::or(Formula::not(a), b)
    }

    pub fn always(i: Interval, f: Formula) -> Formula {
        Formula::Always(i, Box::new(f))
    }

    pub fn eventually(i: Interval, f: Formula) -> Formula {
        Formula::Eventually(i, Box::new(f))
    }

    pub fn until(i: Interval, a: Formula, b: Formula) -> Formula {
        Formula::Until(i, Box::new(a), Box::new(b))
    }

    pub fn next(f: Formula) -> Formula {
        Formula::Next(Box::new(f))
    }

    /// `name(n)` style distance predicate: `signal - n <= 0`.
    pub fn within(signal: Signal, n: f64) -> Formula {
        Formula::prop(LinExpr::signal(signal).minus(LinExpr::constant(n)), Cmp::Le)
    }

    /// Boolean flag stored as 0/1: `signal - 0.5 > 0`.
    pub fn flag(signal: Signal) -> Formula {
        Formula::prop(LinExpr::signal(signal).minus(LinExpr::constant(0.5)), Cmp::Gt)
    }

    pub fn stopped() -> Formula {
        Formula::prop(
            LinExpr::signal(Signal::Speed).minus(LinExpr::constant(STOPPED_KMH)),
            Cmp::Lt,
        )
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::Const(_) | Formula::Prop { .. } => 0,
            Formula::Not(a) | Formula::Eventually(_, a) | Formula::Always(_, a) | Formula::Next(a) => {
                1 + a.depth()
            }
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(_, a, b) => {
                1 + a.depth().max(b.depth())
            }
        }
    }
}

fn signal_name(s: Signal) -> &'static str {
    match s {
        Signal::Speed => "speed",
        Signal::Accel => "accel",
        Signal::IsOverTaking => "isOverTaking",
        Signal::IsChangingLane => "isChangingLane",
        Signal::NpcAheadDist => "npcAheadDist",
        Signal::JunctionDist => "junctionDist",
        Signal::StoplineDist => "stoplineDist",
        Signal::StopSignDist => "stopSignDist",
        Signal::NearestNpcDist => "nearestNpcDist",
        Signal::DestDist => "destDist",
        Signal::TrafficLightColor => "trafficLightColor",
        Signal::RainIntensity => "rainIntensity",
        Signal::FogIntensity => "fogIntensity",
        Signal::SnowIntensity => "snowIntensity",
        Signal::Visibility => "visibility",
        Signal::InJunction => "inJunction",
        Signal::LaneKind => "laneKind",
        Signal::Gear => "gear",
        Signal::JunctionJam => "junctionJam",
    }
}

impl fmt::Display for LinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for &(s, c) in &self.terms {
            let name = signal_name(s);
            match (first, c) {
                (true, 1.0) => write!(f, "{name}")?,
                (true, -1.0) => write!(f, "-{name}")?,
                (true, c) => write!(f, "{c}*{name}")?,
                (false, 1.0) => write!(f, " + {name}")?,
                (false, -1.0) => write!(f, " - {name}")?,
                (false, c) if c < 0.0 => write!(f, " - {}*{name}", -c)?,
                (false, c) => write!(f, " + {c}*{name}")?,
            }
            first = false;
        }
        if first {
            write!(f, "{}", self.constant)
        } else if self.constant > 0.0 {
            write!(f, " + {}", self.constant)
        } else if self.constant < 0.0 {
            write!(f, " - {}", -self.constant)
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.hi.is_infinite() {
            write!(f, "[{},inf]", self.lo)
        } else {
            write!(f, "[{},{}]", self.lo, self.hi)
        }
    }
}

/// Fully parenthesized rendering; quantities are printed by their stored names.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Const(b) => write!(f, "{b}"),
            Formula::Prop { expr, cmp } => write!(f, "({expr} {} 0)", cmp.symbol()),
            Formula::Not(a) => write!(f, "!{a}"),
            Formula::And(a, b) => write!(f, "({a} & {b})"),
            Formula::Or(a, b) => write!(f, "({a} | {b})"),
            Formula::Until(i, a, b) => write!(f, "({a} U{i} {b})"),
            Formula::Eventually(i, a) => write!(f, "F{i} {a}"),
            Formula::Always(i, a) => write!(f, "G{i} {a}"),
            Formula::Next(a) => write!(f, "X {a}"),
        }
    }
}

/// Extended-real robustness degree; values `<= 0` mean the property is violated.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Robustness(pub f64);

impl Robustness {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn satisfied(self) -> bool {
        self.0 > 0.0
    }
}

impl fmt::Display for Robustness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            write!(f, "{}inf", if self.0 < 0.0 { "-" } else { "" })
        } else {
            write!(f, "{:.3}", self.0)
        }
    }
}

/// Serializes as a JSON number, or the strings `"inf"` / `"-inf"`.
impl Serialize for Robustness {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str(if self.0 > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Robustness {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Robustness(v)),
            Repr::Str(s) if s == "inf" => Ok(Robustness(f64::INFINITY)),
            Repr::Str(s) if s == "-inf" => Ok(Robustness(f64::NEG_INFINITY)),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("bad robustness `{s}`"))),
        }
    }
}
