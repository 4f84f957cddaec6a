//! Temporal property language: parsing, robustness semantics and shipped properties.

mod ast;
mod builtins;
mod parser;
mod robustness;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::trace::{Trace, TraceError};

pub use ast::{Cmp, Formula, Interval, LinExpr, Robustness};
pub use builtins::{builtin, BuiltinSpec, BUILTINS};
pub use parser::{parse_spec, parse_spec_file, NamedSpec};
pub use robustness::signal;
pub(crate) use robustness::{atom_table, signal_with_atoms};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("at offset {pos}: {msg}")]
    UnknownVariable { pos: usize, msg: String },
    #[error("malformed interval at offset {pos}: [{lo},{hi}] needs 0 <= lo <= hi")]
    MalformedInterval { pos: usize, lo: f64, hi: f64 },
    #[error("spec file line {line}: {msg}")]
    File { line: usize, msg: String },
    #[error("unknown spec `{0}`")]
    UnknownSpec(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

impl SpecError {
    /// Byte offset of the problem, when known.
    pub fn pos(&self) -> usize {
        match self {
            SpecError::Syntax { pos, .. }
            | SpecError::UnknownVariable { pos, .. }
            | SpecError::MalformedInterval { pos, .. } => *pos,
            _ => 0,
        }
    }
}

/// ρ(φ, π, t).
pub fn robustness(f: &Formula, trace: &Trace, t: usize) -> Result<Robustness, SpecError> {
    if t >= trace.len() {
        return Err(TraceError::OutOfRange {
            step: t,
            len: trace.len(),
        }
        .into());
    }
    Ok(Robustness(signal(f, trace.scenes(), trace.dt())[t]))
}

pub fn satisfies(f: &Formula, trace: &Trace) -> bool {
    robustness(f, trace, 0).is_ok_and(|r| r.satisfied())
}

pub fn builtin_specs() -> BTreeMap<&'static str, Formula> {
    BUILTINS.iter().map(|b| (b.name, b.formula())).collect()
}

/// A property ready for checking, from a builtin name or spec text.
#[derive(Debug, Clone)]
pub struct ResolvedSpec {
    pub name: String,
    pub text: String,
    /// Text placed in the rule segment of a repair prompt.
    pub prose: String,
    pub formula: Formula,
}

impl ResolvedSpec {
    pub fn builtin(name: &str) -> Result<Self, SpecError> {
        let b = builtin(name).ok_or_else(|| SpecError::UnknownSpec(name.to_string()))?;
        Ok(ResolvedSpec {
            name: b.name.to_string(),
            text: b.text.to_string(),
            prose: b.prose.to_string(),
            formula: b.formula(),
        })
    }

    pub fn from_named(spec: NamedSpec) -> Self {
        ResolvedSpec {
            prose: spec.text.clone(),
            name: spec.name,
            text: spec.text,
            formula: spec.formula,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{Signal, Trace};

    fn ramp() -> Trace {
        let v: Vec<f64> = (0..=90).map(f64::from).collect();
        Trace::from_signal(Signal::Speed, &v, 0.1).unwrap()
    }

    #[test]
    fn example_two_and_three() {
        let f = parse_spec("G (speed < 60)").unwrap();
        let tr = Trace::from_signal(Signal::Speed, &[20.0, 50.0, 35.0, 0.0], 0.1).unwrap();
        assert_eq!(robustness(&f, &tr, 0).unwrap().value(), 10.0);
        assert!(satisfies(&f, &tr));
        assert_eq!(robustness(&f, &ramp(), 0).unwrap().value(), -30.0);
        assert!(!satisfies(&f, &ramp()));
    }

    #[test]
    fn parse_shapes() {
        let f = parse_spec("G (speed < 60)").unwrap();
        let want = Formula::always(
            Interval::UNBOUNDED,
            Formula::prop(LinExpr::signal(Signal::Speed).minus(LinExpr::constant(60.0)), Cmp::Lt),
        );
        assert_eq!(f, want);
        assert_eq!(
            parse_spec("G (!NearestNPC(0.1))").unwrap(),
            Formula::always(
                Interval::UNBOUNDED,
                Formula::not(Formula::within(Signal::NearestNpcDist, 0.1))
            )
        );
        assert_eq!(
            parse_spec("always(speed<60)").unwrap(),
            parse_spec("G ( speed < 60 )").unwrap()
        );
    }

    #[test]
    fn finish_journey_shape() {
        let f = parse_spec("G (F[0,200](speed > 0.5) | dest(5))").unwrap();
        let inner = Formula::or(
            Formula::eventually(
                Interval::new(0.0, 200.0).unwrap(),
                Formula::prop(LinExpr::signal(Signal::Speed).minus(LinExpr::constant(0.5)), Cmp::Gt),
            ),
            Formula::within(Signal::DestDist, 5.0),
        );
        assert_eq!(f, Formula::always(Interval::UNBOUNDED, inner));
    }

    #[test]
    fn precedence_and_sugar() {
        let f = parse_spec("a_b").unwrap_err();
        assert!(matches!(f, SpecError::UnknownVariable { .. }));
        let imp = parse_spec("inJunction -> stopped -> speed > 1").unwrap();
        let want = Formula::implies(
            Formula::flag(Signal::InJunction),
            Formula::implies(
                Formula::stopped(),
                Formula::prop(LinExpr::signal(Signal::Speed).minus(LinExpr::constant(1.0)), Cmp::Gt),
            ),
        );
        assert_eq!(imp, want);
        let mixed = parse_spec("stopped | inJunction & isOverTaking").unwrap();
        assert_eq!(
            mixed,
            Formula::or(
                Formula::stopped(),
                Formula::and(Formula::flag(Signal::InJunction), Formula::flag(Signal::IsOverTaking))
            )
        );
        let lin = parse_spec("2*speed - (accel + 3) / 2 >= visibility").unwrap();
        let e = LinExpr::signal(Signal::Speed)
            .scaled(2.0)
            .minus(LinExpr::signal(Signal::Accel).plus(LinExpr::constant(3.0)).scaled(0.5))
            .minus(LinExpr::signal(Signal::Visibility));
        assert_eq!(lin, Formula::prop(e, Cmp::Ge));
    }

    #[test]
    fn until_and_intervals() {
        let f = parse_spec("stopped U[1, 2.5] !stopped").unwrap();
        assert_eq!(
            f,
            Formula::until(
                Interval::new(1.0, 2.5).unwrap(),
                Formula::stopped(),
                Formula::not(Formula::stopped())
            )
        );
        assert!(matches!(
            parse_spec("F[5,2] stopped"),
            Err(SpecError::MalformedInterval { pos: 1, .. })
        ));
        assert!(parse_spec("F[2,inf] stopped").unwrap() != parse_spec("F stopped").unwrap());
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_spec("G (speed < )") {
            Err(SpecError::Syntax { pos, .. }) => assert_eq!(pos, 11),
            other => panic!("{other:?}"),
        }
        match parse_spec("G (speed < 60") {
            Err(SpecError::Syntax { pos, .. }) => assert_eq!(pos, 13),
            other => panic!("{other:?}"),
        }
        match parse_spec("G (warp > 1)") {
            Err(SpecError::UnknownVariable { pos, .. }) => assert_eq!(pos, 3),
            other => panic!("{other:?}"),
        }
        assert!(parse_spec("speed").is_err());
        assert!(parse_spec("G stopped extra").is_err());
        assert!(parse_spec("speed * accel > 1").is_err());
    }

    #[test]
    fn empty_window_eventually() {
        let f = parse_spec("F[5,9] speed > 0").unwrap();
        let tr = Trace::from_signal(Signal::Speed, &[1.0, 2.0, 3.0], 1.0).unwrap();
        assert_eq!(robustness(&f, &tr, 0).unwrap().value(), f64::NEG_INFINITY);
        assert!(!satisfies(&f, &tr));
    }

    #[test]
    fn builtins_parse() {
        let specs = builtin_specs();
        assert_eq!(specs.len(), 8);
        assert_eq!(specs["no_collision"], parse_spec("G (!NearestNPC(0.1))").unwrap());
        assert!(!specs.contains_key("unknown"));
        let law46 = parse_spec(
            "G ((fogIntensity>0 | rainIntensity>0 | snowIntensity>0 | visibility<50) -> speed <= 30)",
        )
        .unwrap();
        assert_eq!(specs["law46"], law46);
    }

    #[test]
    fn spec_file_stanzas() {
        let text = "# comment\nname: slow\nstl: G (speed < 30)\n\nname: moving\nstl: F speed > 1\n";
        let specs = parse_spec_file(text).unwrap();
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[1].name, "moving");
        assert!(matches!(
            parse_spec_file("stl: G stopped\n"),
            Err(SpecError::File { line: 1, .. })
        ));
        assert!(matches!(
            parse_spec_file("name: a\nname: b\nstl: stopped\n"),
            Err(SpecError::File { line: 1, .. })
        ));
        assert!(matches!(
            parse_spec_file("name: a\nstl: G (\n"),
            Err(SpecError::File { line: 2, .. })
        ));
    }

    #[test]
    fn out_of_range_step() {
        let f = parse_spec("G stopped").unwrap();
        assert!(robustness(&f, &ramp(), 91).is_err());
    }

    #[test]
    fn robustness_serde() {
        let v = serde_json::to_string(&[Robustness(1.5), Robustness(f64::NEG_INFINITY)]).unwrap();
        assert_eq!(v, r#"[1.5,"-inf"]"#);
        let back: Vec<Robustness> = serde_json::from_str(&v).unwrap();
        assert_eq!(back[1].value(), f64::NEG_INFINITY);
    }
}
