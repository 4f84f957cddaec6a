//! The rule language for driving-strategy repairs.
//!
//! ```text
//! rule "Drive slowly through a junction when there is an obstacle."
//! trigger
//!     entering_junction
//! condition
//!     obstacle_distance_leq(20)
//!     is_traffic_light(green)
//! then
//!     cruise_speed(30)
//! until
//!     exiting_junction
//! end
//! ```

mod catalog;
mod interp;
mod json;
mod parser;
mod validate;

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

pub use catalog::{Entry, EntryKind, Param, ParamType, VocabularyCatalog};
pub use interp::{step_rules, PlannerParams, RuleStates};
pub use json::{emit_schema, from_json, to_json, ConversionError};
pub use parser::{parse_program, ParseError};
pub use validate::{validate, Diagnostic};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Arg {
    Num(f64),
    Bool(bool),
    Ident(String),
    Str(String),
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Num(v) => write!(f, "{}", format_number(*v)),
            Arg::Bool(b) => write!(f, "{b}"),
            Arg::Ident(s) => write!(f, "{s}"),
            Arg::Str(s) => write!(f, "{}", quote(s)),
        }
    }
}

/// An event, condition or action reference: `name` or `name(arg, ...)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Call {
    pub name: String,
    pub args: Vec<Arg>,
}

impl Call {
    pub fn new(name: &str, args: Vec<Arg>) -> Self {
        Call {
            name: name.to_string(),
            args,
        }
    }

    pub fn bare(name: &str) -> Self {
        Call::new(name, Vec::new())
    }
}

impl fmt::Display for Call {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        if !self.args.is_empty() {
            let args: Vec<String> = self.args.iter().map(Arg::to_string).collect();
            write!(f, "({})", args.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub negated: bool,
    pub call: Call,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub name: String,
    /// An event, or `always`.
    pub trigger: Call,
    pub conditions: Vec<Condition>,
    pub actions: Vec<Call>,
    pub until: Option<Call>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuDriveProgram {
    pub rules: Vec<Rule>,
}

pub const ALWAYS: &str = "always";

/// Integers print without a fractional part; everything else uses the shortest
/// representation that reads back to the same value.
pub fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Canonical source text: keywords at column 0, items indented by four spaces,
/// one blank line between rules.
pub fn pretty_print(p: &MuDriveProgram) -> String {
    let mut out = String::new();
    for (i, r) in p.rules.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "rule {}", quote(&r.name));
        let _ = writeln!(out, "trigger\n    {}", r.trigger);
        if !r.conditions.is_empty() {
            out.push_str("condition\n");
            for c in &r.conditions {
                let bang = if c.negated { "!" } else { "" };
                let _ = writeln!(out, "    {bang}{}", c.call);
            }
        }
        out.push_str("then\n");
        for a in &r.actions {
            let _ = writeln!(out, "    {a}");
        }
        if let Some(u) = &r.until {
            let _ = writeln!(out, "until\n    {u}");
        }
        out.push_str("end\n");
    }
    out
}

impl fmt::Display for MuDriveProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty_print(self))
    }
}
