//! Test-side reference evaluators and fixtures, written without reference to the library's
//! evaluation code. Formulas live in their own small AST and reach the library only as text.

#![allow(dead_code)]

use rand::Rng;

use drive_repair::trace::{Scene, Signal, Trace};

pub const ORACLE_DT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rel {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

/// Interval in whole seconds; `hi == None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Win {
    pub lo: u32,
    pub hi: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Phi {
    Top,
    Bot,
    /// `a·speed + b·accel  rel  c`
    Atom { a: i32, b: i32, rel: Rel, c: f64 },
    Not(Box<Phi>),
    And(Box<Phi>, Box<Phi>),
    Or(Box<Phi>, Box<Phi>),
    Until(Win, Box<Phi>, Box<Phi>),
    Ev(Win, Box<Phi>),
    Al(Win, Box<Phi>),
    Next(Box<Phi>),
}

fn win_text(w: Win) -> String {
    match w.hi {
        Some(hi) => format!("[{},{}]", w.lo, hi),
        None if w.lo == 0 => String::new(),
        None => format!("[{},inf]", w.lo),
    }
}

impl Phi {
    pub fn text(&self) -> String {
        match self {
            Phi::Top => "true".into(),
            Phi::Bot => "false".into(),
            Phi::Atom { a, b, rel, c } => {
                let op = match rel {
                    Rel::Lt => "<",
                    Rel::Le => "<=",
                    Rel::Gt => ">",
                    Rel::Ge => ">=",
                    Rel::Eq => "==",
                    Rel::Ne => "!=",
                };
                format!("({a} * speed + {b} * accel {op} {c})")
            }
            Phi::Not(p) => format!("(!{})", p.text()),
            Phi::And(p, q) => format!("({} & {})", p.text(), q.text()),
            Phi::Or(p, q) => format!("({} | {})", p.text(), q.text()),
            Phi::Until(w, p, q) => format!("({} U{} {})", p.text(), win_text(*w), q.text()),
            Phi::Ev(w, p) => format!("(F{} {})", win_text(*w), p.text()),
            Phi::Al(w, p) => format!("(G{} {})", win_text(*w), p.text()),
            Phi::Next(p) => format!("(X {})", p.text()),
        }
    }
}

/// One sample of the two signals the oracle formulas read.
#[derive(Debug, Clone, Copy)]
pub struct Sample {
    pub speed: f64,
    pub accel: f64,
}

pub fn to_trace(samples: &[Sample]) -> Trace {
    let scenes = samples
        .iter()
        .map(|s| {
            let mut sc = Scene::empty();
            sc.set(Signal::Speed, s.speed);
            sc.set(Signal::Accel, s.accel);
            sc
        })
        .collect();
    Trace::new(scenes, ORACLE_DT).unwrap()
}

/// Step indices `t + lo ..= min(t + hi, last)`, in steps of `ORACLE_DT`.
fn window(w: Win, t: usize, last: usize) -> std::ops::RangeInclusive<usize> {
    let per_s = (1.0 / ORACLE_DT) as usize;
    let lo = t + w.lo as usize * per_s;
    let hi = w.hi.map_or(last, |h| (t + h as usize * per_s).min(last));
    lo..=hi
}

fn atom_value(a: i32, b: i32, c: f64, s: Sample) -> f64 {
    f64::from(a) * s.speed + f64::from(b) * s.accel - c
}

/// Direct recursive robustness over a finite trace.
pub fn rho(phi: &Phi, tr: &[Sample], t: usize) -> f64 {
    let last = tr.len() - 1;
    match phi {
        Phi::Top => f64::INFINITY,
        Phi::Bot => f64::NEG_INFINITY,
        Phi::Atom { a, b, rel, c } => {
            let f = atom_value(*a, *b, *c, tr[t]);
            match rel {
                Rel::Lt | Rel::Le => -f,
                Rel::Gt | Rel::Ge => f,
                Rel::Ne => f.abs(),
                Rel::Eq => -f.abs(),
            }
        }
        Phi::Not(p) => -rho(p, tr, t),
        Phi::And(p, q) => rho(p, tr, t).min(rho(q, tr, t)),
        Phi::Or(p, q) => rho(p, tr, t).max(rho(q, tr, t)),
        Phi::Ev(w, p) => window(*w, t, last).map(|k| rho(p, tr, k)).fold(f64::NEG_INFINITY, f64::max),
        Phi::Al(w, p) => window(*w, t, last).map(|k| rho(p, tr, k)).fold(f64::INFINITY, f64::min),
        Phi::Until(w, p, q) => window(*w, t, last)
            .map(|t1| {
                let hold = (t..=t1).map(|t2| rho(p, tr, t2)).fold(f64::INFINITY, f64::min);
                rho(q, tr, t1).min(hold)
            })
            .fold(f64::NEG_INFINITY, f64::max),
        Phi::Next(p) => {
            if t < last {
                rho(p, tr, t + 1)
            } else {
                f64::INFINITY
            }
        }
    }
}

/// Boolean satisfaction over a finite trace with the same window clipping.
pub fn holds(phi: &Phi, tr: &[Sample], t: usize) -> bool {
    let last = tr.len() - 1;
    match phi {
        Phi::Top => true,
        Phi::Bot => false,
        Phi::Atom { a, b, rel, c } => {
            let lhs = f64::from(*a) * tr[t].speed + f64::from(*b) * tr[t].accel;
            match rel {
                Rel::Lt => lhs < *c,
                Rel::Le => lhs <= *c,
                Rel::Gt => lhs > *c,
                Rel::Ge => lhs >= *c,
                Rel::Eq => lhs == *c,
                Rel::Ne => lhs != *c,
            }
        }
        Phi::Not(p) => !holds(p, tr, t),
        Phi::And(p, q) => holds(p, tr, t) && holds(q, tr, t),
        Phi::Or(p, q) => holds(p, tr, t) || holds(q, tr, t),
        Phi::Ev(w, p) => window(*w, t, last).any(|k| holds(p, tr, k)),
        Phi::Al(w, p) => window(*w, t, last).all(|k| holds(p, tr, k)),
        Phi::Until(w, p, q) => {
            window(*w, t, last).any(|t1| holds(q, tr, t1) && (t..=t1).all(|t2| holds(p, tr, t2)))
        }
        Phi::Next(p) => t >= last || holds(p, tr, t + 1),
    }
}

fn random_win<R: Rng>(rng: &mut R) -> Win {
    let lo = rng.gen_range(0..=3);
    let hi = if rng.gen_bool(0.2) { None } else { Some(lo + rng.gen_range(0..=3)) };
    Win { lo, hi }
}

/// Random formula of depth at most `depth`. Atom thresholds sit on half-integers and the
/// signals are integers, so no atom is ever exactly at its boundary.
pub fn random_phi<R: Rng>(rng: &mut R, depth: usize) -> Phi {
    let leaf = depth == 0 || rng.gen_bool(0.25);
    if leaf {
        if rng.gen_bool(0.05) {
            return if rng.gen_bool(0.5) { Phi::Top } else { Phi::Bot };
        }
        let rels = [Rel::Lt, Rel::Le, Rel::Gt, Rel::Ge, Rel::Eq, Rel::Ne];
        return Phi::Atom {
            a: rng.gen_range(-1..=2),
            b: rng.gen_range(-1..=1),
            rel: rels[rng.gen_range(0..rels.len())],
            c: f64::from(rng.gen_range(-8..=8)) + 0.5,
        };
    }
    let sub = |rng: &mut R| Box::new(random_phi(rng, depth - 1));
    match rng.gen_range(0..7) {
        0 => Phi::Not(sub(rng)),
        1 => Phi::And(sub(rng), sub(rng)),
        2 => Phi::Or(sub(rng), sub(rng)),
        3 => Phi::Until(random_win(rng), sub(rng), sub(rng)),
        4 => Phi::Ev(random_win(rng), sub(rng)),
        5 => Phi::Al(random_win(rng), sub(rng)),
        _ => Phi::Next(sub(rng)),
    }
}

pub fn random_trace<R: Rng>(rng: &mut R, max_len: usize) -> Vec<Sample> {
    let n = rng.gen_range(1..=max_len);
    (0..n)
        .map(|_| Sample {
            speed: f64::from(rng.gen_range(-5..=5)),
            accel: f64::from(rng.gen_range(-5..=5)),
        })
        .collect()
}
