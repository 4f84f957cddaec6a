use std::fs;
use std::sync::atomic::{AtomicUsize, Ordering};

use drive_repair::pipeline::{cmd_repair, PipelineConfig, PipelineReport, RunStatus, StageStatus};
use drive_repair::repair::{Backend, BackendKind, ChatRequest, ChatResponse, MockBackend, MockFault, RepairError};
use drive_repair::spec::{builtin, robustness};
use drive_repair::trace::{build_trace, load_record, DEFAULT_DT};

struct Counting {
    inner: MockBackend,
    calls: AtomicUsize,
}

impl Counting {
    fn new(inner: MockBackend) -> Self {
        Counting {
            inner,
            calls: AtomicUsize::new(0),
        }
    }
}

impl Backend for Counting {
    fn kind(&self) -> BackendKind {
        self.inner.kind()
    }

    fn complete(&self, req: &ChatRequest<'_>) -> Result<ChatResponse, RepairError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(req)
    }
}

fn config(scenario: &str, n: usize, out: &std::path::Path) -> PipelineConfig {
    PipelineConfig {
        scenario: Some(scenario.into()),
        n,
        out_dir: out.to_path_buf(),
        ..PipelineConfig::default()
    }
}

#[test]
fn satisfied_property_makes_no_backend_calls() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("loose.stl");
    fs::write(&spec, "name: loose\nstl: G (speed < 1000)\n").unwrap();
    let mut cfg = config("S6", 5, dir.path());
    cfg.spec = Some(spec.display().to_string());
    let backend = Counting::new(MockBackend::new());
    let run = cmd_repair(&cfg, &backend).unwrap();
    assert_eq!(backend.calls.load(Ordering::SeqCst), 0);
    assert_eq!(run.report.status, RunStatus::NoViolation);
    assert_eq!(run.report.status.exit_code(), 0);
    assert!(run.report.candidates.is_empty());
    assert!(run.report.stages.iter().any(|s| s.status == StageStatus::Skipped));
    assert!(run.run_dir.join("report.json").exists());
}

#[test]
fn weather_scenario_is_fixed_cheaply() {
    let dir = tempfile::tempdir().unwrap();
    let backend = Counting::new(MockBackend::new());
    let run = cmd_repair(&config("S6", 5, dir.path()), &backend).unwrap();
    let r = &run.report;
    assert_eq!(r.status, RunStatus::Fixed);
    assert_eq!(r.fix_rate, 1.0);
    assert!(r.total_cost_usd < 0.40, "{}", r.total_cost_usd);
    assert_eq!(backend.calls.load(Ordering::SeqCst) as u64, r.backend_calls);
    assert!(r.candidates.iter().all(|c| c.fixed && c.attempts == 1));
}

#[test]
fn invalid_first_answers_are_retried() {
    for fault in [MockFault::EmptyActions, MockFault::Malformed] {
        let dir = tempfile::tempdir().unwrap();
        let backend = Counting::new(MockBackend::with_fault(fault));
        let r = cmd_repair(&config("S6", 3, dir.path()), &backend).unwrap().report;
        assert!(r.candidates.iter().all(|c| c.valid && c.attempts == 2), "{fault:?}");
        assert_eq!(backend.calls.load(Ordering::SeqCst), 6);
        assert_eq!(r.backend_calls, 6);
        assert_eq!(r.status, RunStatus::Fixed);
    }
}

#[test]
fn persistent_invalid_answers_exhaust_retries() {
    let dir = tempfile::tempdir().unwrap();
    let backend = Counting::new(MockBackend::with_fault(MockFault::AlwaysEmptyActions));
    let cfg = config("S6", 2, dir.path());
    let r = cmd_repair(&cfg, &backend).unwrap().report;
    let retries = cfg.backend_config.max_retries as usize;
    assert_eq!(backend.calls.load(Ordering::SeqCst), 2 * retries);
    assert!(r.candidates.iter().all(|c| !c.valid && c.error.is_some() && !c.fixed));
    assert_eq!(r.status, RunStatus::Unfixed);
    assert_eq!(r.status.exit_code(), 2);
    assert_eq!(r.fix_rate, 0.0);
    assert!(r.total_cost_usd > 0.0);
}

#[test]
fn rerun_reuses_stored_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("S3", 4, dir.path());
    let first = cmd_repair(&cfg, &MockBackend::new()).unwrap();
    let before = fs::read(first.run_dir.join("report.json")).unwrap();
    let backend = Counting::new(MockBackend::new());
    let second = cmd_repair(&cfg, &backend).unwrap();
    assert_eq!(backend.calls.load(Ordering::SeqCst), 0);
    assert_eq!(second.run_dir, first.run_dir);
    assert_eq!(fs::read(second.run_dir.join("report.json")).unwrap(), before);
}

#[test]
fn report_can_be_recomputed_from_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let run = cmd_repair(&config("S1", 6, dir.path()), &MockBackend::new()).unwrap();
    let r = PipelineReport::load(run.run_dir.join("report.json")).unwrap();
    assert_eq!(r, run.report);
    let phi = builtin(&r.spec).unwrap().formula();
    let collision = builtin("no_collision").unwrap().formula();
    let mut fixed = 0;
    for c in &r.candidates {
        let v = c.replay.as_ref().unwrap();
        let frames = load_record(run.run_dir.join(&v.record)).unwrap();
        let tr = build_trace(&frames, DEFAULT_DT).unwrap();
        assert_eq!(robustness(&phi, &tr, 0).unwrap().value(), v.rho_spec);
        assert_eq!(robustness(&collision, &tr, 0).unwrap().value(), v.rho_no_collision);
        assert_eq!(c.fixed, v.satisfied());
        fixed += usize::from(c.fixed);
    }
    assert_eq!(r.fix_rate, fixed as f64 / r.candidates.len() as f64);
    let total: f64 = r.candidates.iter().map(|c| c.cost_usd).sum();
    assert!((r.total_cost_usd - total).abs() < 1e-12);
    let tokens: u64 = r.candidates.iter().map(|c| c.input_tokens).sum();
    assert_eq!(r.total_input_tokens, tokens);
    let base = r.baseline.as_ref().unwrap();
    let frames = load_record(run.run_dir.join(&base.record)).unwrap();
    let tr = build_trace(&frames, DEFAULT_DT).unwrap();
    assert_eq!(robustness(&phi, &tr, 0).unwrap().value(), base.rho_spec);
}

#[test]
fn record_without_scenario_is_unverified() {
    let dir = tempfile::tempdir().unwrap();
    let seeded = cmd_repair(&config("S6", 1, dir.path()), &MockBackend::new()).unwrap();
    let cfg = PipelineConfig {
        record: Some(seeded.run_dir.join("baseline.jsonl")),
        spec: Some("law46".into()),
        n: 2,
        out_dir: dir.path().join("record-only"),
        ..PipelineConfig::default()
    };
    let r = cmd_repair(&cfg, &MockBackend::new()).unwrap().report;
    assert_eq!(r.status, RunStatus::Unverified);
    assert_eq!(r.status.exit_code(), 2);
    assert_eq!(r.candidates.len(), 2);
    assert!(r.candidates.iter().all(|c| c.replay.is_none() && !c.fixed));
}

#[test]
fn bad_configuration_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("S1", 0, dir.path());
    assert!(cmd_repair(&cfg, &MockBackend::new()).is_err());
    cfg.n = 1;
    cfg.delta = -1.0;
    assert!(cmd_repair(&cfg, &MockBackend::new()).is_err());
    let cfg = PipelineConfig {
        out_dir: dir.path().into(),
        ..PipelineConfig::default()
    };
    assert!(cmd_repair(&cfg, &MockBackend::new()).is_err());
    assert!(cmd_repair(&config("S99", 1, dir.path()), &MockBackend::new()).is_err());
}
