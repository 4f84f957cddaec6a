//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

mod common;

use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use drive_repair::localizer::{locate, prefix_robustness};
use drive_repair::mudrive::{emit_schema, from_json, parse_program, pretty_print, to_json, validate, PlannerParams, VocabularyCatalog};
use drive_repair::pipeline::{cmd_repair, PipelineConfig, PipelineReport};
use drive_repair::promptgen::render_moment;
use drive_repair::repair::{cost_usd, MockBackend, TokenUsage};
use drive_repair::simulator::{benchmark_suite, evaluate_trace, run_scenario, EGO_MASS_KG, SCENARIO_IDS};
use drive_repair::spec::{builtin, parse_spec, robustness};
use drive_repair::trace::{build_trace, record_to_string, RawRecordFrame, Signal, Trace, DEFAULT_DT};

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Check {
    ensure(start.elapsed() < limit, || {
        format!("took {:.1}s, limit {:.0}s", start.elapsed().as_secs_f64(), limit.as_secs_f64())
    })
}

fn robustness_exactness() -> Check {
    let start = Instant::now();
    let phi = parse_spec("G (speed < 60)").map_err(|e| e.to_string())?;
    let ex2 = Trace::from_signal(Signal::Speed, &[0.0, 0.3, 12.0, 35.0, 50.0], DEFAULT_DT).unwrap();
    let r = robustness(&phi, &ex2, 0).unwrap().value();
    ensure(r == 10.0, || format!("speed-limit example: rho {r}, expected 10"))?;

    let ramp: Vec<f64> = (0..=90).map(f64::from).collect();
    let ramp = Trace::from_signal(Signal::Speed, &ramp, DEFAULT_DT).unwrap();
    for k in 0..=55 {
        let r = prefix_robustness(&phi, &ramp, k).unwrap().value();
        ensure(r == 60.0 - k as f64, || format!("ramp prefix {k}: rho {r}"))?;
    }
    for (k, want) in [(55, 5.0), (60, 0.0), (61, -1.0)] {
        let r = prefix_robustness(&phi, &ramp, k).unwrap().value();
        ensure(r == want, || format!("ramp prefix {k}: rho {r}, expected {want}"))?;
    }
    let full = robustness(&phi, &ramp, 0).unwrap().value();
    ensure(full == -30.0, || format!("ramp full trace: rho {full}, expected -30"))?;
    let ms = locate(&phi, &ramp, 5.0).map_err(|e| e.to_string())?;
    ensure(ms.violation_step == Some(60) && ms.near_miss_step == Some(55), || {
        format!("moments {:?}/{:?}, expected 60/55", ms.violation_step, ms.near_miss_step)
    })?;
    within(Duration::from_secs(1), start)
}

fn oracle_equivalence() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut sign_ok, mut value_ok, mut cases) = (0usize, 0usize, 0usize);
    for _ in 0..1000 {
        let phi = common::random_phi(&mut rng, 3);
        let samples = common::random_trace(&mut rng, 12);
        let f = parse_spec(&phi.text()).map_err(|e| format!("{}: {e}", phi.text()))?;
        let got = robustness(&f, &common::to_trace(&samples), 0).unwrap().value();
        let want = common::rho(&phi, &samples, 0);
        cases += 1;
        sign_ok += usize::from((got > 0.0) == common::holds(&phi, &samples, 0));
        let same = if want.is_infinite() { got == want } else { (got - want).abs() <= 1e-9 };
        value_ok += usize::from(same);
    }
    ensure(sign_ok == cases, || format!("sign agreement {sign_ok}/{cases}"))?;
    ensure(value_ok == cases, || format!("value agreement {value_ok}/{cases}"))?;
    within(Duration::from_secs(30), start)
}

const JUNCTION_RULE: &str = r#"rule "Drive slowly through a junction when there is an obstacle."
trigger
    entering_junction
condition
    obstacle_distance_leq(20)
    is_traffic_light(green)
then
    cruise_speed(30)
until
    exiting_junction
end
"#;

const FOLLOW_RULE: &str = r#"rule "S1 rule1"
trigger
    always
condition
    front_vehicle_closer_than(10)
then
    follow_dist(10)
    yield_dist(15)
    overtake_dist(20)
    obstacle_stop_dist(10)
    obstacle_decrease_ratio(1)
end
"#;

const RED_LIGHT_RULE: &str = r#"rule "S1 rule2"
trigger
    always
condition
    is_traffic_light(red)
    traffic_light_distance_leq(10)
then
    traffic_light_stop_dist(5)
end
"#;

fn dsl_conformance() -> Check {
    let cat = VocabularyCatalog::standard();
    let schema = emit_schema(&cat);
    let validator = jsonschema::validator_for(&schema).map_err(|e| format!("schema does not compile: {e}"))?;
    for src in [JUNCTION_RULE, FOLLOW_RULE, RED_LIGHT_RULE] {
        let p = parse_program(src).map_err(|e| e.to_string())?;
        let diags = validate(&p, &cat);
        ensure(diags.is_empty(), || format!("diagnostics: {diags:?}"))?;
        let printed = pretty_print(&p);
        ensure(parse_program(&printed).ok().as_ref() == Some(&p), || "pretty-print round trip differs".into())?;
        let doc = to_json(&p, &cat).map_err(|e| e.to_string())?;
        ensure(validator.is_valid(&doc), || format!("schema rejects {doc}"))?;
        let back = from_json(&doc, &cat).map_err(|e| e.to_string())?;
        ensure(back == p, || "JSON round trip differs".into())?;
    }

    let doc = to_json(&parse_program(JUNCTION_RULE).unwrap(), &cat).unwrap();
    let mut no_actions = doc.clone();
    no_actions["rules"][0]["actions"] = json!([]);
    let mut two_untils = doc.clone();
    two_untils["rules"][0]["until"] = json!([{ "name": "exiting_junction" }, { "name": "exiting_junction" }]);
    let mut unknown = doc.clone();
    unknown["rules"][0]["actions"][0] = json!({ "name": "teleport", "x": 1 });
    for (label, bad) in [("zero actions", no_actions), ("two exits", two_untils), ("unknown name", unknown)] {
        ensure(!validator.is_valid(&bad), || format!("schema accepts {label}"))?;
        let converted = from_json(&bad, &cat).ok().filter(|p| validate(p, &cat).is_empty());
        ensure(converted.is_none(), || format!("conversion accepts {label}"))?;
    }
    let text_cases = [
        "rule \"a\" trigger always then end",
        "rule \"a\" trigger always then cruise_speed(30) until exiting_junction until entering_junction end",
    ];
    for src in text_cases {
        ensure(parse_program(src).is_err(), || format!("parser accepts {src}"))?;
    }
    let unknown = parse_program("rule \"a\" trigger always then teleport(1) end").map_err(|e| e.to_string())?;
    ensure(!validate(&unknown, &cat).is_empty(), || "validator accepts unknown action".into())
}

fn suite_reports() -> &'static Result<Vec<PipelineReport>, String> {
    static REPORTS: OnceLock<Result<Vec<PipelineReport>, String>> = OnceLock::new();
    REPORTS.get_or_init(|| {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        SCENARIO_IDS
            .iter()
            .map(|id| {
                let cfg = PipelineConfig {
                    scenario: Some(id.to_string()),
                    out_dir: dir.path().to_path_buf(),
                    ..PipelineConfig::default()
                };
                cmd_repair(&cfg, &MockBackend::new())
                    .map(|r| r.report)
                    .map_err(|e| format!("{id}: {e}"))
            })
            .collect()
    })
}

fn pipeline_efficacy() -> Check {
    let start = Instant::now();
    let reports = suite_reports().as_ref().map_err(Clone::clone)?;
    for r in reports {
        let base = r.baseline.as_ref().ok_or_else(|| format!("{}: no baseline verdict", r.record_id))?;
        ensure(base.rho_spec <= 0.0, || format!("{}: baseline rho {} > 0", r.record_id, base.rho_spec))?;
        let best = r
            .candidates
            .iter()
            .filter_map(|c| c.replay.as_ref())
            .find(|v| v.rho_spec > 0.0 && v.rho_no_collision > 0.0);
        ensure(best.is_some(), || format!("{}: no candidate fixes the violation", r.record_id))?;
    }
    within(Duration::from_secs(120), start)
}

fn cost_accounting() -> Check {
    let table = [
        (7352, 179, 0.079),
        (7352, 163, 0.078),
        (7436, 121, 0.078),
        (7435, 185, 0.080),
        (7508, 97, 0.078),
        (7498, 81, 0.077),
        (7504, 123, 0.079),
        (7350, 82, 0.076),
    ];
    for (i, o, want) in table {
        let c = cost_usd(i, o, 10.0, 30.0);
        ensure((c - want).abs() < 0.001, || format!("{i}/{o} tokens: ${c:.4}, table ${want}"))?;
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = PipelineConfig {
        scenario: Some("S1".into()),
        n: 1,
        out_dir: dir.path().to_path_buf(),
        ..PipelineConfig::default()
    };
    cfg.backend_config.token_override = Some(TokenUsage { input: 7352, output: 179 });
    let replayed = cmd_repair(&cfg, &MockBackend::new()).map_err(|e| e.to_string())?.report;
    ensure((replayed.total_cost_usd - 0.079).abs() < 0.001, || {
        format!("replayed usage costs ${:.4}", replayed.total_cost_usd)
    })?;
    let reports = suite_reports().as_ref().map_err(Clone::clone)?;
    for r in reports {
        for c in &r.candidates {
            ensure(c.cost_usd < 0.08, || format!("{} candidate {}: ${:.4}", r.record_id, c.index, c.cost_usd))?;
        }
    }
    Ok(())
}

fn frame_with_speed(template: &RawRecordFrame, t: f64, kmh: f64) -> RawRecordFrame {
    let mut f = template.clone();
    f.t = t;
    f.ego.speed = kmh;
    f
}

fn energy_identity() -> Check {
    let template = run_scenario(&benchmark_suite()[5], None, &PlannerParams::default())
        .map_err(|e| e.to_string())?
        .frames[0]
        .clone();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..100 {
        let n = rng.gen_range(2..60);
        let speeds: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..120.0)).collect();
        let frames: Vec<_> = speeds
            .iter()
            .enumerate()
            .map(|(i, &v)| frame_with_speed(&template, i as f64 * DEFAULT_DT, v))
            .collect();
        let m = evaluate_trace(&frames).ok_or("no metrics")?;
        let (v0, vn) = (speeds[0] / 3.6, speeds[n - 1] / 3.6);
        let closed = 0.5 * EGO_MASS_KG * (vn * vn - v0 * v0);
        ensure((m.energy_j - closed).abs() <= 1e-6, || {
            format!("case {case}: literal {} vs closed form {closed}", m.energy_j)
        })?;
    }
    let frames: Vec<_> = [0.0, 36.0, 0.0]
        .iter()
        .enumerate()
        .map(|(i, &v)| frame_with_speed(&template, i as f64, v))
        .collect();
    let m = evaluate_trace(&frames).ok_or("no metrics")?;
    ensure(m.energy_j.abs() <= 1e-6, || format!("0-10-0 m/s literal energy {}", m.energy_j))?;
    ensure((m.energy_positive_j - 75_000.0).abs() <= 1e-6, || {
        format!("0-10-0 m/s positive energy {}", m.energy_positive_j)
    })
}

fn delta_sweep() -> Check {
    let deltas = [1.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0];
    for s in benchmark_suite() {
        let run = run_scenario(&s, None, &PlannerParams::default()).map_err(|e| e.to_string())?;
        let trace = build_trace(&run.frames, DEFAULT_DT).map_err(|e| e.to_string())?;
        let phi = builtin(&s.spec).ok_or("unknown spec")?.formula();
        let mut prev: Option<usize> = None;
        for d in deltas {
            let ms = locate(&phi, &trace, d).map_err(|e| e.to_string())?;
            let nm = ms.near_miss_step.ok_or_else(|| format!("{}: no near miss at delta {d}", s.id))?;
            ensure(prev.is_none_or(|p| nm <= p), || format!("{}: near miss rises to {nm} at delta {d}", s.id))?;
            prev = Some(nm);
        }
        let ms = locate(&phi, &trace, 0.0).map_err(|e| e.to_string())?;
        ensure(ms.near_miss_step == ms.violation_step, || {
            format!("{}: delta 0 gives {:?} vs {:?}", s.id, ms.near_miss_step, ms.violation_step)
        })?;
    }
    Ok(())
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Check {
    let params = PlannerParams::default();
    for s in benchmark_suite() {
        let a = run_scenario(&s, None, &params).map_err(|e| e.to_string())?;
        let b = run_scenario(&s, None, &params).map_err(|e| e.to_string())?;
        ensure(record_to_string(&a.frames) == record_to_string(&b.frames), || format!("{}: records differ", s.id))?;
        let mid = &a.frames[a.frames.len() / 2];
        ensure(render_moment(mid, &params) == render_moment(&b.frames[b.frames.len() / 2], &params), || {
            format!("{}: images differ", s.id)
        })?;
    }
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for id in SCENARIO_IDS {
        let mut trees = Vec::new();
        for d in [&d1, &d2] {
            let cfg = PipelineConfig {
                scenario: Some(id.into()),
                n: 3,
                seed: 11,
                out_dir: d.path().to_path_buf(),
                ..PipelineConfig::default()
            };
            let run = cmd_repair(&cfg, &MockBackend::new()).map_err(|e| e.to_string())?;
            trees.push(read_tree(&run.run_dir));
        }
        ensure(!trees[0].is_empty() && trees[0] == trees[1], || format!("{id}: run artifacts differ"))?;
        let names: Vec<&str> = trees[0].iter().map(|(n, _)| n.as_str()).collect();
        for want in ["report.json", "prompt/prompt.txt", "prompt/near_miss.svg", "baseline.jsonl"] {
            ensure(names.contains(&want), || format!("{id}: {want} missing"))?;
        }
    }
    Ok(())
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("robustness exactness", robustness_exactness),
        ("oracle equivalence", oracle_equivalence),
        ("rule language conformance", dsl_conformance),
        ("pipeline efficacy", pipeline_efficacy),
        ("cost accounting", cost_accounting),
        ("energy identity", energy_identity),
        ("delta sweep behaviour", delta_sweep),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(()) => println!("criterion {}: {name}: PASS ({secs:.2}s)", i + 1),
            Err(e) => {
                failures += 1;
                println!("criterion {}: {name}: FAIL ({secs:.2}s): {e}", i + 1);
            }
        }
    }
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}
