use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use drive_repair::mudrive::{
    emit_schema, from_json, parse_program, pretty_print, to_json, validate, Arg, Call, Condition, Entry,
    EntryKind, MuDriveProgram, ParamType, Rule, VocabularyCatalog, ALWAYS,
};

fn random_call(rng: &mut ChaCha8Rng, e: &Entry) -> Call {
    let args = e
        .params
        .iter()
        .map(|p| match &p.ty {
            ParamType::Real { min, max, .. } => {
                // whole and quarter values both survive the text form exactly
                let v = min + (max - min) * rng.gen_range(0.0..=1.0);
                Arg::Num((v * 4.0).round().clamp(min * 4.0, max * 4.0) / 4.0)
            }
            ParamType::Enum { values } => Arg::Ident(values.choose(rng).unwrap().clone()),
            ParamType::Bool => Arg::Bool(rng.gen_bool(0.5)),
        })
        .collect();
    Call::new(&e.name, args)
}

fn random_program(rng: &mut ChaCha8Rng, cat: &VocabularyCatalog) -> MuDriveProgram {
    let pick = |rng: &mut ChaCha8Rng, kind| cat.entries(kind).choose(rng).unwrap().clone();
    let rules = (0..rng.gen_range(1..=3))
        .map(|i| {
            let trigger = if rng.gen_bool(0.3) {
                Call::bare(ALWAYS)
            } else {
                let e = pick(rng, EntryKind::Event);
                random_call(rng, &e)
            };
            let conditions = (0..rng.gen_range(0..=3))
                .map(|_| {
                    let e = pick(rng, EntryKind::Condition);
                    Condition {
                        negated: rng.gen_bool(0.3),
                        call: random_call(rng, &e),
                    }
                })
                .collect();
            let actions = (0..rng.gen_range(1..=4))
                .map(|_| {
                    let e = pick(rng, EntryKind::Action);
                    random_call(rng, &e)
                })
                .collect();
            let until = rng.gen_bool(0.4).then(|| {
                let e = pick(rng, EntryKind::Event);
                random_call(rng, &e)
            });
            Rule {
                name: format!("rule {i} \"quoted\""),
                trigger,
                conditions,
                actions,
                until,
            }
        })
        .collect();
    MuDriveProgram { rules }
}

/// One structural or value-level edit somewhere in a program document.
fn mutate(rng: &mut ChaCha8Rng, doc: &mut Value) {
    let rules = doc["rules"].as_array_mut().unwrap();
    let n = rules.len();
    let rule = &mut rules[rng.gen_range(0..n)];
    let first_action = &mut rule["actions"][0];
    match rng.gen_range(0..10) {
        0 => rule["actions"] = json!([]),
        1 => {
            rule.as_object_mut().unwrap().remove("trigger");
        }
        2 => rule["extra"] = json!(1),
        3 => first_action["name"] = json!("warp_drive"),
        4 => rule["until"] = json!([{ "name": "exiting_junction" }]),
        5 => rule["conditions"] = json!({ "negated": false }),
        6 => rule["name"] = json!(17),
        7 => {
            let obj = first_action.as_object_mut().unwrap();
            match obj.iter_mut().find(|(k, _)| k.as_str() != "name") {
                Some((_, v)) if v.is_number() => *v = json!(1.0e9),
                Some((_, v)) if v.is_string() => *v = json!("purple"),
                Some((_, v)) => *v = json!("yes"),
                None => {
                    obj.insert("unexpected".into(), json!(3));
                }
            }
        }
        8 => {
            let obj = first_action.as_object_mut().unwrap();
            let key = obj.keys().find(|k| k.as_str() != "name").cloned();
            match key {
                Some(k) => {
                    obj.remove(&k);
                }
                None => {
                    obj.insert("unexpected".into(), json!(3));
                }
            }
        }
        _ => doc["rules"] = json!([]),
    }
}

fn accepted(doc: &Value, cat: &VocabularyCatalog) -> bool {
    from_json(doc, cat).is_ok_and(|p| validate(&p, cat).is_empty())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generated_programs_round_trip(seed in any::<u64>()) {
        let cat = VocabularyCatalog::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_program(&mut rng, &cat);
        prop_assert!(validate(&p, &cat).is_empty());
        let text = pretty_print(&p);
        prop_assert_eq!(parse_program(&text).unwrap(), p.clone());
        let doc = to_json(&p, &cat).unwrap();
        prop_assert!(jsonschema::is_valid(&emit_schema(&cat), &doc));
        prop_assert_eq!(from_json(&doc, &cat).unwrap(), p);
    }

    #[test]
    fn schema_and_conversion_agree_on_mutants(seed in any::<u64>()) {
        let cat = VocabularyCatalog::standard();
        let schema = emit_schema(&cat);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_program(&mut rng, &cat);
        let mut doc = to_json(&p, &cat).unwrap();
        mutate(&mut rng, &mut doc);
        prop_assert_eq!(jsonschema::is_valid(&schema, &doc), accepted(&doc, &cat), "{}", doc);
    }
}

#[test]
fn schema_is_draft_2020_12_and_closed() {
    let schema = emit_schema(&VocabularyCatalog::standard());
    assert_eq!(schema["$schema"], "https://json-schema.org/draft/2020-12/schema");
    assert!(jsonschema::validator_for(&schema).is_ok());
    let bare = json!({ "rules": [], "comment": "x" });
    assert!(!jsonschema::is_valid(&schema, &bare));
}

#[test]
fn duplicate_rule_names_are_a_validation_concern() {
    let cat = VocabularyCatalog::standard();
    let p = parse_program(
        "rule \"a\" trigger always then cruise_speed(30) end\nrule \"a\" trigger always then cruise_speed(20) end",
    )
    .unwrap();
    let doc = to_json(&p, &cat).unwrap();
    assert!(jsonschema::is_valid(&emit_schema(&cat), &doc));
    assert!(validate(&p, &cat).iter().any(|d| d.message.contains("duplicate")));
}

#[test]
fn syntax_errors_carry_positions() {
    for src in ["", "rule trigger", "rule \"x\" trigger always then cruise_speed(30", "rule \"x\" trigger always then cruise_speed(30) end extra"] {
        let e = parse_program(src).unwrap_err();
        assert!(!e.to_string().is_empty(), "{src}");
    }
}

#[test]
fn comments_and_negation_parse() {
    let src = "# leading comment\nrule \"n\"\ntrigger\n    always\ncondition\n    !is_traffic_light(red)\nthen\n    cruise_speed(20)\nend\n";
    let p = parse_program(src).unwrap();
    assert!(p.rules[0].conditions[0].negated);
    assert!(validate(&p, &VocabularyCatalog::standard()).is_empty());
}
