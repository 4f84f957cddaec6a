//! JSON form of programs for function calling: schema emission and conversion.
//!
//! A call is an object whose `name` selects the catalog entry and whose other members
//! are the entry's parameters by name, e.g. `{"name": "cruise_speed", "speed_kmh": 30}`.

use std::fmt;

use serde_json::{json, Map, Value};
use thiserror::Error;

use super::catalog::{Entry, EntryKind, ParamType, VocabularyCatalog};
use super::validate::{check_arg, Diagnostic};
use super::{Arg, Call, Condition, MuDriveProgram, Rule, ALWAYS};

pub const SCHEMA_DIALECT: &str = "https://json-schema.org/draft/2020-12/schema";

fn param_schema(p: &super::catalog::Param) -> Value {
    let desc = format!("{} Unit: {}.", p.description, p.ty.unit());
    match &p.ty {
        ParamType::Real { min, max, .. } => json!({
            "type": "number",
            "minimum": min,
            "maximum": max,
            "description": desc,
        }),
        ParamType::Enum { values } => json!({
            "type": "string",
            "enum": values,
            "description": desc,
        }),
        ParamType::Bool => json!({ "type": "boolean", "description": desc }),
    }
}

fn entry_schema(e: &Entry) -> Value {
    let mut props = Map::new();
    props.insert("name".into(), json!({ "const": e.name }));
    let mut required = vec![json!("name")];
    for p in &e.params {
        props.insert(p.name.clone(), param_schema(p));
        required.push(json!(p.name));
    }
    json!({
        "type": "object",
        "description": e.description,
        "properties": props,
        "required": required,
        "additionalProperties": false,
    })
}

fn always_entry() -> Entry {
    Entry {
        name: ALWAYS.into(),
        description: "The rule is considered on every planning cycle.".into(),
        params: vec![],
    }
}

/// Draft 2020-12 schema for a whole program. Member order inside a rule is fixed:
/// name, trigger, conditions, actions, until.
pub fn emit_schema(cat: &VocabularyCatalog) -> Value {
    let union = |entries: Vec<&Entry>, desc: &str| {
        json!({
            "description": desc,
            "anyOf": entries.into_iter().map(entry_schema).collect::<Vec<_>>(),
        })
    };
    let always = always_entry();
    let mut triggers = vec![&always];
    triggers.extend(cat.events.iter());
    json!({
        "$schema": SCHEMA_DIALECT,
        "title": "driving strategy rule program",
        "description": "One or more rules. Each rule has one trigger, zero or more conditions, \
                        one or more actions, and at most one exit trigger, in that order.",
        "type": "object",
        "properties": {
            "rules": {
                "type": "array",
                "minItems": 1,
                "items": { "$ref": "#/$defs/rule" },
            },
        },
        "required": ["rules"],
        "additionalProperties": false,
        "$defs": {
            "rule": {
                "type": "object",
                "properties": {
                    "name": {
                        "type": "string",
                        "pattern": "\\S",
                        "description": "Short unique title of the rule.",
                    },
                    "trigger": { "$ref": "#/$defs/trigger" },
                    "conditions": {
                        "type": "array",
                        "description": "All conditions must hold for the rule to apply.",
                        "items": {
                            "type": "object",
                            "properties": {
                                "negated": {
                                    "type": "boolean",
                                    "description": "When true the condition must NOT hold.",
                                },
                                "condition": { "$ref": "#/$defs/condition" },
                            },
                            "required": ["negated", "condition"],
                            "additionalProperties": false,
                        },
                    },
                    "actions": {
                        "type": "array",
                        "minItems": 1,
                        "description": "Parameter settings applied while the rule is active.",
                        "items": { "$ref": "#/$defs/action" },
                    },
                    "until": { "$ref": "#/$defs/exit_trigger" },
                },
                "required": ["name", "trigger", "actions"],
                "additionalProperties": false,
            },
            "trigger": union(triggers, "Event that starts the rule, or `always`."),
            "exit_trigger": union(cat.events.iter().collect(), "Event that ends the rule."),
            "condition": union(cat.conditions.iter().collect(), "A test on the current situation."),
            "action": union(cat.actions.iter().collect(), "A planner parameter assignment."),
        },
    })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub struct ConversionError {
    /// Paths are JSON pointers into the converted document.
    pub problems: Vec<Diagnostic>,
}

impl fmt::Display for ConversionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.problems.iter().map(Diagnostic::to_string).collect();
        write!(f, "invalid program document: {}", parts.join("; "))
    }
}

fn arg_to_json(a: &Arg) -> Value {
    match a {
        Arg::Num(v) => json!(v),
        Arg::Bool(b) => json!(b),
        Arg::Ident(s) | Arg::Str(s) => json!(s),
    }
}

fn call_to_json(cat: &VocabularyCatalog, kind: EntryKind, c: &Call, path: &str) -> Result<Value, Diagnostic> {
    let always = always_entry();
    let entry = if kind == EntryKind::Event && c.name == ALWAYS {
        Some(&always)
    } else {
        cat.lookup(kind, &c.name)
    };
    let entry = entry.filter(|e| e.params.len() == c.args.len()).ok_or_else(|| Diagnostic {
        path: path.to_string(),
        message: format!("`{c}` has no catalog entry of that arity"),
    })?;
    let mut m = Map::new();
    m.insert("name".into(), json!(c.name));
    for (p, a) in entry.params.iter().zip(&c.args) {
        m.insert(p.name.clone(), arg_to_json(a));
    }
    Ok(Value::Object(m))
}

/// JSON document for `p`; fails when a call has no catalog entry to name its parameters.
pub fn to_json(p: &MuDriveProgram, cat: &VocabularyCatalog) -> Result<Value, ConversionError> {
    let mut problems = Vec::new();
    let mut rules = Vec::new();
    for (i, r) in p.rules.iter().enumerate() {
        let base = format!("/rules/{i}");
        let mut conv = |kind, c: &Call, path: String| match call_to_json(cat, kind, c, &path) {
            Ok(v) => v,
            Err(d) => {
                problems.push(d);
                Value::Null
            }
        };
        let mut m = Map::new();
        m.insert("name".into(), json!(r.name));
        m.insert("trigger".into(), conv(EntryKind::Event, &r.trigger, format!("{base}/trigger")));
        if !r.conditions.is_empty() {
            let conds: Vec<Value> = r
                .conditions
                .iter()
                .enumerate()
                .map(|(j, c)| {
                    json!({
                        "negated": c.negated,
                        "condition": conv(EntryKind::Condition, &c.call, format!("{base}/conditions/{j}/condition")),
                    })
                })
                .collect();
            m.insert("conditions".into(), Value::Array(conds));
        }
        let acts: Vec<Value> = r
            .actions
            .iter()
            .enumerate()
            .map(|(j, a)| conv(EntryKind::Action, a, format!("{base}/actions/{j}")))
            .collect();
        m.insert("actions".into(), Value::Array(acts));
        if let Some(u) = &r.until {
            m.insert("until".into(), conv(EntryKind::Event, u, format!("{base}/until")));
        }
        rules.push(Value::Object(m));
    }
    if problems.is_empty() {
        Ok(json!({ "rules": rules }))
    } else {
        Err(ConversionError { problems })
    }
}

struct Reader<'a> {
    cat: &'a VocabularyCatalog,
    problems: Vec<Diagnostic>,
}

impl Reader<'_> {
    fn fail(&mut self, path: &str, message: impl Into<String>) {
        self.problems.push(Diagnostic {
            path: if path.is_empty() { "/".into() } else { path.to_string() },
            message: message.into(),
        });
    }

    fn object<'v>(&mut self, v: &'v Value, path: &str, allowed: &[&str]) -> Option<&'v Map<String, Value>> {
        let Some(m) = v.as_object() else {
            self.fail(path, "expected an object");
            return None;
        };
        for k in m.keys() {
            if !allowed.contains(&k.as_str()) {
                self.fail(&format!("{path}/{}", escape(k)), "unexpected member");
            }
        }
        Some(m)
    }

    fn program(&mut self, doc: &Value) -> Option<MuDriveProgram> {
        let m = self.object(doc, "", &["rules"])?;
        let Some(rules) = m.get("rules") else {
            self.fail("/rules", "missing required member");
            return None;
        };
        let Some(arr) = rules.as_array() else {
            self.fail("/rules", "expected an array");
            return None;
        };
        if arr.is_empty() {
            self.fail("/rules", "at least one rule is required");
        }
        let out: Vec<Option<Rule>> = arr
            .iter()
            .enumerate()
            .map(|(i, r)| self.rule(r, &format!("/rules/{i}")))
            .collect();
        out.into_iter().collect::<Option<Vec<_>>>().map(|rules| MuDriveProgram { rules })
    }

    fn rule(&mut self, v: &Value, path: &str) -> Option<Rule> {
        let m = self.object(v, path, &["name", "trigger", "conditions", "actions", "until"])?;
        let name = match m.get("name") {
            Some(Value::String(s)) if !s.trim().is_empty() => Some(s.clone()),
            Some(Value::String(_)) => {
                self.fail(&format!("{path}/name"), "rule name must not be blank");
                None
            }
            Some(_) => {
                self.fail(&format!("{path}/name"), "expected a string");
                None
            }
            None => {
                self.fail(&format!("{path}/name"), "missing required member");
                None
            }
        };
        let trigger = match m.get("trigger") {
            Some(t) => self.call(t, &format!("{path}/trigger"), EntryKind::Event, true),
            None => {
                self.fail(&format!("{path}/trigger"), "missing required member");
                None
            }
        };
        let mut conditions = Some(Vec::new());
        if let Some(c) = m.get("conditions") {
            conditions = self.conditions(c, &format!("{path}/conditions"));
        }
        let actions = match m.get("actions") {
            Some(Value::Array(a)) => {
                if a.is_empty() {
                    self.fail(&format!("{path}/actions"), "at least one action is required");
                }
                let items: Vec<Option<Call>> = a
                    .iter()
                    .enumerate()
                    .map(|(j, x)| self.call(x, &format!("{path}/actions/{j}"), EntryKind::Action, false))
                    .collect();
                items.into_iter().collect::<Option<Vec<_>>>().filter(|v| !v.is_empty())
            }
            Some(_) => {
                self.fail(&format!("{path}/actions"), "expected an array");
                None
            }
            None => {
                self.fail(&format!("{path}/actions"), "missing required member");
                None
            }
        };
        let until = match m.get("until") {
            Some(u) => Some(self.call(u, &format!("{path}/until"), EntryKind::Event, false)?),
            None => None,
        };
        Some(Rule {
            name: name?,
            trigger: trigger?,
            conditions: conditions?,
            actions: actions?,
            until,
        })
    }

    fn conditions(&mut self, v: &Value, path: &str) -> Option<Vec<Condition>> {
        let Some(arr) = v.as_array() else {
            self.fail(path, "expected an array");
            return None;
        };
        let mut out = Some(Vec::new());
        for (j, item) in arr.iter().enumerate() {
            let p = format!("{path}/{j}");
            let Some(m) = self.object(item, &p, &["negated", "condition"]) else {
                out = None;
                continue;
            };
            let negated = match m.get("negated") {
                Some(Value::Bool(b)) => Some(*b),
                Some(_) => {
                    self.fail(&format!("{p}/negated"), "expected a boolean");
                    None
                }
                None => {
                    self.fail(&format!("{p}/negated"), "missing required member");
                    None
                }
            };
            let call = match m.get("condition") {
                Some(c) => self.call(c, &format!("{p}/condition"), EntryKind::Condition, false),
                None => {
                    self.fail(&format!("{p}/condition"), "missing required member");
                    None
                }
            };
            match (negated, call, out.as_mut()) {
                (Some(negated), Some(call), Some(list)) => list.push(Condition { negated, call }),
                _ => out = None,
            }
        }
        out
    }

    fn call(&mut self, v: &Value, path: &str, kind: EntryKind, allow_always: bool) -> Option<Call> {
        let Some(m) = v.as_object() else {
            self.fail(path, "expected an object");
            return None;
        };
        let name = match m.get("name") {
            Some(Value::String(s)) => s.clone(),
            Some(_) => {
                self.fail(&format!("{path}/name"), "expected a string");
                return None;
            }
            None => {
                self.fail(&format!("{path}/name"), "missing required member");
                return None;
            }
        };
        let always = always_entry();
        let entry = if allow_always && name == ALWAYS {
            &always
        } else if let Some(e) = self.cat.lookup(kind, &name) {
            e
        } else {
            self.fail(&format!("{path}/name"), format!("`{name}` is not in the catalog"));
            return None;
        };
        let mut ok = true;
        for k in m.keys() {
            if k != "name" && !entry.params.iter().any(|p| &p.name == k) {
                self.fail(&format!("{path}/{}", escape(k)), "unexpected member");
                ok = false;
            }
        }
        let mut args = Vec::new();
        for p in &entry.params {
            let pp = format!("{path}/{}", escape(&p.name));
            let arg = match (m.get(&p.name), &p.ty) {
                (None, _) => {
                    self.fail(&pp, "missing required member");
                    ok = false;
                    continue;
                }
                (Some(Value::Number(n)), ParamType::Real { .. }) => n.as_f64().map(Arg::Num),
                (Some(Value::String(s)), ParamType::Enum { .. }) => Some(Arg::Ident(s.clone())),
                (Some(Value::Bool(b)), ParamType::Bool) => Some(Arg::Bool(*b)),
                (Some(_), ty) => {
                    let want = match ty {
                        ParamType::Real { .. } => "a number",
                        ParamType::Enum { .. } => "a string",
                        ParamType::Bool => "a boolean",
                    };
                    self.fail(&pp, format!("expected {want}"));
                    None
                }
            };
            match arg {
                Some(a) => {
                    if let Some(problem) = check_arg(&p.ty, &a) {
                        self.fail(&pp, problem);
                        ok = false;
                    }
                    args.push(a);
                }
                None => ok = false,
            }
        }
        ok.then_some(Call { name, args })
    }
}

fn escape(key: &str) -> String {
    key.replace('~', "~0").replace('/', "~1")
}

/// Converts a function-call document into a program, reporting every problem the schema
/// would reject with its JSON pointer.
pub fn from_json(doc: &Value, cat: &VocabularyCatalog) -> Result<MuDriveProgram, ConversionError> {
    let mut r = Reader {
        cat,
        problems: Vec::new(),
    };
    let p = r.program(doc);
    match p {
        Some(p) if r.problems.is_empty() => Ok(p),
        _ => Err(ConversionError {
            problems: r.problems,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mudrive::parse_program;

    #[test]
    fn round_trip_through_json() {
        let cat = VocabularyCatalog::standard();
        let p = parse_program(
            "rule \"r\" trigger always condition !is_weather(fog) then enable_lane_borrow(true) \
             cruise_speed(25.5) until exiting_junction end",
        )
        .unwrap();
        let doc = to_json(&p, &cat).unwrap();
        assert_eq!(
            serde_json::to_string(&doc["rules"][0]["actions"][1]).unwrap(),
            r#"{"name":"cruise_speed","speed_kmh":25.5}"#
        );
        assert_eq!(from_json(&doc, &cat).unwrap(), p);
    }

    #[test]
    fn pointers_in_errors() {
        let cat = VocabularyCatalog::standard();
        let doc = json!({"rules": [{"name": "a", "trigger": {"name": "always"},
            "actions": [{"name": "cruise_speed", "speed_kmh": 500}, {"name": "fly"}]}]});
        let e = from_json(&doc, &cat).unwrap_err();
        let paths: Vec<_> = e.problems.iter().map(|d| d.path.as_str()).collect();
        assert_eq!(paths, vec!["/rules/0/actions/0/speed_kmh", "/rules/0/actions/1/name"]);
        let doc = json!({"rules": [{"name": "a", "trigger": {"name": "always"}, "actions": []}]});
        assert!(from_json(&doc, &cat).is_err());
        let doc = json!({"rules": [{"name": "a", "trigger": {"name": "always"},
            "actions": [{"name": "cruise_speed", "speed_kmh": 5}],
            "until": [{"name": "exiting_junction"}, {"name": "exiting_junction"}]}]});
        let e = from_json(&doc, &cat).unwrap_err();
        assert_eq!(e.problems[0].path, "/rules/0/until");
    }

    #[test]
    fn schema_has_fixed_member_order() {
        let s = emit_schema(&VocabularyCatalog::standard());
        let keys: Vec<&String> = s["$defs"]["rule"]["properties"].as_object().unwrap().keys().collect();
        assert_eq!(keys, ["name", "trigger", "conditions", "actions", "until"]);
        assert_eq!(s["$defs"]["action"]["anyOf"].as_array().unwrap().len(), 9);
        assert_eq!(s["$defs"]["trigger"]["anyOf"].as_array().unwrap().len(), 6);
    }
}
