use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drive-repair"))
        .args(args)
        .current_dir(cwd)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn json_out(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!("{e}\nstdout: {}\nstderr: {}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
    })
}

#[test]
fn localize_reports_moments() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["localize", "--scenario", "S6", "--delta", "5"], dir.path());
    assert!(o.status.success());
    let v = json_out(&o);
    assert_eq!(v["spec"], "law46");
    let viol = v["violation_step"].as_u64().unwrap();
    let near = v["near_miss_step"].as_u64().unwrap();
    assert!(near <= viol);
    let rho = v["rho_at_each"].as_array().unwrap();
    assert!(rho[viol as usize].as_f64().unwrap() <= 0.0);
}

#[test]
fn repair_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("runs");
    let out_s = out.to_str().unwrap();
    let o = bin(&["repair", "--scenario", "S6", "--n", "3", "--out", out_s, "--json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json_out(&o);
    assert_eq!(report["status"], "fixed");
    let run_dir = out.join(report["run_id"].as_str().unwrap());
    assert!(run_dir.join("report.json").is_file());

    let o = bin(&["report", run_dir.to_str().unwrap(), "--json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json_out(&o), report);

    let o = bin(&["report", run_dir.to_str().unwrap()], dir.path());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("law46"), "{text}");
}

#[test]
fn unfixable_run_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("never.stl");
    fs::write(&spec, "name: never\nstl: G (speed < 1)\n").unwrap();
    let o = bin(
        &["repair", "--scenario", "S6", "--spec", spec.to_str().unwrap(), "--n", "1", "--out", "runs"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sim_run_with_and_without_repair() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["sim", "run", "--scenario", "S3", "--out", "base.jsonl"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(dir.path().join("base.jsonl").is_file());

    let prog = dir.path().join("fix.mud");
    fs::write(&prog, drive_repair::simulator::reference_repair_source("S3").unwrap()).unwrap();
    let o = bin(
        &["sim", "run", "--scenario", "S3", "--repair", "fix.mud", "--metrics", "m.json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
    assert!(m["rho"].as_f64().unwrap() > 0.0);
    assert_eq!(m, json_out(&o));
}

#[test]
fn prompt_writes_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["prompt", "--scenario", "S1", "--out", "p"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let listed = String::from_utf8(o.stdout).unwrap();
    assert_eq!(listed.lines().count(), 4);
    for line in listed.lines() {
        assert!(dir.path().join(line).is_file() || Path::new(line).is_file(), "{line}");
    }
}

#[test]
fn sweep_prints_one_row_per_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["sweep-delta", "--scenario", "S6", "--n", "1", "--deltas", "0,5,10", "--json"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = json_out(&o);
    assert_eq!(rows.as_array().unwrap().len(), 3);
}

#[test]
fn mudrive_check_and_schema() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("ok.mud"), "rule \"r\" trigger always then cruise_speed(30) end\n").unwrap();
    fs::write(dir.path().join("bad.mud"), "rule \"r\" trigger always then fly(3) end\n").unwrap();
    fs::write(dir.path().join("broken.mud"), "rule \"r\" trigger\n").unwrap();
    assert_eq!(bin(&["mudrive", "check", "ok.mud"], dir.path()).status.code(), Some(0));
    let bad = bin(&["mudrive", "check", "bad.mud"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("fly"));
    assert_eq!(bin(&["mudrive", "check", "broken.mud"], dir.path()).status.code(), Some(1));

    let o = bin(&["mudrive", "schema"], dir.path());
    assert!(json_out(&o)["$schema"].as_str().unwrap().contains("2020-12"));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.toml"), "scenario = \"S6\"\nn = 2\nout_dir = \"from-config\"\n").unwrap();
    let o = bin(&["--config", "cfg.toml", "repair", "--json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json_out(&o)["candidates"].as_array().unwrap().len(), 2);
    assert!(dir.path().join("from-config").is_dir());
}

#[test]
fn errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["localize", "--scenario", "S42"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    assert_eq!(bin(&["report", "missing.json"], dir.path()).status.code(), Some(1));
}
