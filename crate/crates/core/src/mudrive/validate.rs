use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use super::catalog::{Entry, EntryKind, ParamType, VocabularyCatalog};
use super::{format_number, Arg, Call, MuDriveProgram, ALWAYS};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    /// Location such as `rules[0].actions[1]`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Problems with one argument value against its declared type, if any.
pub(crate) fn check_arg(ty: &ParamType, arg: &Arg) -> Option<String> {
    match (ty, arg) {
        (ParamType::Real { unit, min, max }, Arg::Num(v)) => (!(v >= min && v <= max)).then(|| {
            format!(
                "value {} out of range [{}, {}] {unit}",
                format_number(*v),
                format_number(*min),
                format_number(*max)
            )
        }),
        (ParamType::Real { .. }, other) => Some(format!("expected a number, found `{other}`")),
        (ParamType::Enum { values }, Arg::Ident(s)) => (!values.contains(s))
            .then(|| format!("`{s}` is not one of {}", values.join(", "))),
        (ParamType::Enum { values }, other) => {
            Some(format!("expected one of {}, found `{other}`", values.join(", ")))
        }
        (ParamType::Bool, Arg::Bool(_)) => None,
        (ParamType::Bool, other) => Some(format!("expected true or false, found `{other}`")),
    }
}

fn check_call(entry: &Entry, call: &Call, path: &str, out: &mut Vec<Diagnostic>) {
    if entry.params.len() != call.args.len() {
        out.push(Diagnostic {
            path: path.to_string(),
            message: format!(
                "`{}` takes {} argument(s), found {}",
                call.name,
                entry.params.len(),
                call.args.len()
            ),
        });
        return;
    }
    for (i, (p, a)) in entry.params.iter().zip(&call.args).enumerate() {
        if let Some(problem) = check_arg(&p.ty, a) {
            out.push(Diagnostic {
                path: format!("{path}.args[{i}]"),
                message: format!("`{}` parameter {}: {problem}", call.name, p.name),
            });
        }
    }
}

fn check_ref(
    cat: &VocabularyCatalog,
    kind: EntryKind,
    call: &Call,
    path: &str,
    out: &mut Vec<Diagnostic>,
) {
    match cat.lookup(kind, &call.name) {
        Some(e) => check_call(e, call, path, out),
        None => {
            let what = match kind {
                EntryKind::Event => "event",
                EntryKind::Condition => "condition",
                EntryKind::Action => "action",
            };
            let hint = if call.name == ALWAYS && kind != EntryKind::Event {
                " (`always` is only valid as a trigger)"
            } else {
                ""
            };
            out.push(Diagnostic {
                path: path.to_string(),
                message: format!("unknown {what} `{}`{hint}", call.name),
            });
        }
    }
}

/// Every catalog, arity, type, range and structural problem in `p`; empty when valid.
pub fn validate(p: &MuDriveProgram, cat: &VocabularyCatalog) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if p.rules.is_empty() {
        out.push(Diagnostic {
            path: "rules".into(),
            message: "a program needs at least one rule".into(),
        });
    }
    let mut names = HashSet::new();
    for (i, r) in p.rules.iter().enumerate() {
        let base = format!("rules[{i}]");
        if r.name.trim().is_empty() {
            out.push(Diagnostic {
                path: format!("{base}.name"),
                message: "rule name must not be empty".into(),
            });
        }
        if !names.insert(r.name.as_str()) {
            out.push(Diagnostic {
                path: format!("{base}.name"),
                message: format!("duplicate rule name {:?}", r.name),
            });
        }
        if r.trigger.name == ALWAYS {
            if !r.trigger.args.is_empty() {
                out.push(Diagnostic {
                    path: format!("{base}.trigger"),
                    message: "`always` takes no arguments".into(),
                });
            }
        } else {
            check_ref(cat, EntryKind::Event, &r.trigger, &format!("{base}.trigger"), &mut out);
        }
        for (j, c) in r.conditions.iter().enumerate() {
            check_ref(
                cat,
                EntryKind::Condition,
                &c.call,
                &format!("{base}.conditions[{j}]"),
                &mut out,
            );
        }
        if r.actions.is_empty() {
            out.push(Diagnostic {
                path: format!("{base}.actions"),
                message: "a rule needs at least one action".into(),
            });
        }
        for (j, a) in r.actions.iter().enumerate() {
            check_ref(cat, EntryKind::Action, a, &format!("{base}.actions[{j}]"), &mut out);
        }
        if let Some(u) = &r.until {
            let path = format!("{base}.until");
            if u.name == ALWAYS {
                out.push(Diagnostic {
                    path,
                    message: "`always` cannot end a rule; use an event".into(),
                });
            } else {
                check_ref(cat, EntryKind::Event, u, &path, &mut out);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mudrive::parse_program;

    fn diags(src: &str) -> Vec<Diagnostic> {
        validate(&parse_program(src).unwrap(), &VocabularyCatalog::standard())
    }

    #[test]
    fn clean_program() {
        let d = diags(
            "rule \"a\" trigger entering_junction condition obstacle_distance_leq(20) \
             is_traffic_light(green) then cruise_speed(30) until exiting_junction end",
        );
        assert!(d.is_empty(), "{d:?}");
    }

    #[test]
    fn type_and_enum_errors() {
        let d = diags("rule \"a\" trigger always then cruise_speed(\"fast\") end");
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("expected a number"));
        assert_eq!(d[0].path, "rules[0].actions[0].args[0]");
        let d = diags("rule \"a\" trigger always condition is_traffic_light(blue) then cruise_speed(3) end");
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("not one of"));
    }

    #[test]
    fn catalog_and_structure_errors() {
        let d = diags("rule \"a\" trigger warp condition always then fly end");
        let msgs: Vec<_> = d.iter().map(|x| x.message.as_str()).collect();
        assert_eq!(d.len(), 3, "{msgs:?}");
        assert!(msgs[1].contains("only valid as a trigger"));
        let d = diags("rule \"a\" trigger always then cruise_speed(300) until always end\nrule \"a\" trigger always then cruise_speed end");
        assert_eq!(d.len(), 4, "{d:?}");
        assert!(d.iter().any(|x| x.message.contains("duplicate")));
        assert!(d.iter().any(|x| x.message.contains("out of range")));
    }
}
