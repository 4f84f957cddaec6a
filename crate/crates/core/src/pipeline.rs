//! End-to-end repair runs: localize, prompt, generate, replay, report.
//!
//! Every artifact of a run lives under `<out_dir>/<run_id>/`, where the run id is a hash
//! of all inputs. Rerunning with identical inputs reuses the stored candidates instead of
//! calling the backend again.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::localizer::{locate, CriticalMoments, DEFAULT_DELTA};
use crate::mudrive::{parse_program, validate, MuDriveProgram, PlannerParams, VocabularyCatalog};
use crate::promptgen::{build_prompt, PromptBundle, PromptError};
use crate::repair::{
    batch_generate, cost_usd, Backend, BackendConfig, BackendKind, RepairCandidate, RepairError, TokenUsage,
};
use crate::simulator::{evaluate_trace, run_scenario, scenario, Outcome, ScenarioScript, TraceMetrics};
use crate::spec::{parse_spec_file, robustness, ResolvedSpec};
use crate::trace::{build_trace, nearest_frame, parse_record, record_to_string, RawRecordFrame, DEFAULT_DT};

pub const REPORT_VERSION: u32 = 1;
pub const DEFAULT_CANDIDATES: usize = 20;
const COLLISION_SPEC: &str = "no_collision";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Driving record to analyse. Without one, the scenario's baseline replay is used.
    pub record: Option<PathBuf>,
    /// Benchmark id or scenario JSON path; candidates are replayed only when present.
    pub scenario: Option<String>,
    /// Builtin property name or spec file. Defaults to the scenario's paired property.
    pub spec: Option<String>,
    pub delta: f64,
    pub backend: BackendKind,
    pub backend_config: BackendConfig,
    pub n: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub defaults: PlannerParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            record: None,
            scenario: None,
            spec: None,
            delta: DEFAULT_DELTA,
            backend: BackendKind::Mock,
            backend_config: BackendConfig::default(),
            n: DEFAULT_CANDIDATES,
            seed: 0,
            out_dir: PathBuf::from("runs"),
            defaults: PlannerParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn check(&self) -> Result<(), PipelineError> {
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(PipelineError::Config(format!("delta must be >= 0, got {}", self.delta)));
        }
        if self.n < 1 {
            return Err(PipelineError::Config("n must be >= 1".into()));
        }
        if self.record.is_none() && self.scenario.is_none() {
            return Err(PipelineError::Config("either a record or a scenario is required".into()));
        }
        self.backend_config
            .check()
            .map_err(|e| PipelineError::Config(e.to_string()))
    }
}

/// A benchmark id (`S1` … `S8`) or a path to a scenario JSON file.
pub fn load_scenario(name: &str) -> Result<ScenarioScript, PipelineError> {
    if let Some(s) = scenario(name) {
        return Ok(s);
    }
    ScenarioScript::load(name).map_err(|e| PipelineError::Config(e.to_string()))
}

/// A builtin property name, or a spec file whose first stanza is used.
pub fn load_spec(name: &str) -> Result<ResolvedSpec, PipelineError> {
    if let Ok(s) = ResolvedSpec::builtin(name) {
        return Ok(s);
    }
    let path = Path::new(name);
    if !path.exists() {
        return Err(PipelineError::Config(format!("unknown spec `{name}`")));
    }
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let named = parse_spec_file(&text).map_err(|e| PipelineError::Config(format!("{name}: {e}")))?;
    named
        .into_iter()
        .next()
        .map(ResolvedSpec::from_named)
        .ok_or_else(|| PipelineError::Config(format!("{name}: no spec stanza")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    NoViolation,
    Fixed,
    Unfixed,
    /// Candidates were generated but there was no scenario to replay them in.
    Unverified,
    Error,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::NoViolation | RunStatus::Fixed => 0,
            RunStatus::Unfixed | RunStatus::Unverified => 2,
            RunStatus::Error => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub status: StageStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentsSummary {
    pub violation_step: Option<usize>,
    pub near_miss_step: Option<usize>,
    pub violation_t: Option<f64>,
    pub near_miss_t: Option<f64>,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptArtifacts {
    pub bundle: String,
    pub text: String,
    pub near_miss_image: String,
    pub violation_image: String,
}

/// Robustness and metrics of one replayed (or recorded) drive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveVerdict {
    pub record: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
    pub rho_spec: f64,
    pub rho_no_collision: f64,
    pub metrics: Option<TraceMetrics>,
}

impl DriveVerdict {
    pub fn satisfied(&self) -> bool {
        self.rho_spec > 0.0 && self.rho_no_collision > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub index: usize,
    pub seed: u64,
    pub valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
    pub attempts: u32,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub cost_usd: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replay: Option<DriveVerdict>,
    pub fixed: bool,
    /// Candidate metrics minus baseline metrics, per field.
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub metrics_delta: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub version: u32,
    pub run_id: String,
    pub record_id: String,
    pub spec: String,
    pub status: RunStatus,
    pub stages: Vec<StageRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moments: Option<MomentsSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt: Option<PromptArtifacts>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<DriveVerdict>,
    pub candidates: Vec<CandidateReport>,
    pub fix_rate: f64,
    pub backend_calls: u64,
    pub total_input_tokens: u64,
    pub total_output_tokens: u64,
    pub total_cost_usd: f64,
}

impl PipelineReport {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let report: PipelineReport = serde_json::from_str(&text).map_err(|e| io_err(path, e))?;
        if report.version != REPORT_VERSION {
            return Err(PipelineError::Config(format!(
                "report version {} is not supported (expected {REPORT_VERSION})",
                report.version
            )));
        }
        Ok(report)
    }
}

/// Per-candidate row of `costs.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEntry {
    pub index: usize,
    pub seed: u64,
    pub file: Option<String>,
    pub attempts: u32,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub cost_usd: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    pub backend: BackendKind,
    pub model: String,
    pub price_in: f64,
    pub price_out: f64,
    pub candidates: Vec<CostEntry>,
    pub total_cost_usd: f64,
}

pub struct RunResult {
    pub report: PipelineReport,
    pub run_dir: PathBuf,
}

/// The record, property and scenario a run works on.
pub struct RunInputs {
    pub record_text: String,
    pub record_id: String,
    pub spec: ResolvedSpec,
    pub script: Option<ScenarioScript>,
    /// Set when the record is the scenario's baseline replay.
    pub baseline_outcome: Option<Outcome>,
}

/// Loads the inputs named by `cfg`, replaying the scenario baseline when no record is given.
pub fn prepare(cfg: &PipelineConfig) -> Result<RunInputs, PipelineError> {
    let script = cfg.scenario.as_deref().map(load_scenario).transpose()?;
    let spec_name = cfg
        .spec
        .clone()
        .or_else(|| script.as_ref().map(|s| s.spec.clone()))
        .ok_or_else(|| PipelineError::Config("no spec given and no scenario to take it from".into()))?;
    let spec = load_spec(&spec_name)?;
    let (record_text, record_id, baseline_outcome) = match (&cfg.record, &script) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            let id = path
                .file_stem()
                .map_or_else(|| "record".to_string(), |s| s.to_string_lossy().into_owned());
            (text, id, None)
        }
        (None, Some(s)) => {
            let run = run_scenario(s, None, &cfg.defaults).map_err(|e| PipelineError::Config(e.to_string()))?;
            (record_to_string(&run.frames), s.id.clone(), Some(run.outcome))
        }
        (None, None) => {
            return Err(PipelineError::Config("either a record or a scenario is required".into()))
        }
    };
    Ok(RunInputs {
        record_text,
        record_id,
        spec,
        script,
        baseline_outcome,
    })
}

fn run_id(cfg: &PipelineConfig, inputs: &RunInputs) -> String {
    let key = json!({
        "version": REPORT_VERSION,
        "record": inputs.record_text,
        "spec": [inputs.spec.name, inputs.spec.text],
        "scenario": inputs.script,
        "delta": cfg.delta,
        "backend": cfg.backend,
        "backend_config": cfg.backend_config,
        "n": cfg.n,
        "seed": cfg.seed,
        "defaults": cfg.defaults,
    });
    let digest = Sha256::digest(key.to_string().as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("{}-{}", inputs.record_id, &hex[..16])
}

fn write(dir: &Path, rel: &str, contents: &str) -> Result<String, PipelineError> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
    Ok(rel.to_string())
}

fn to_pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report types serialize");
    s.push('\n');
    s
}

fn verdict(
    frames: &[RawRecordFrame],
    spec: &ResolvedSpec,
    collision: &ResolvedSpec,
    record: String,
    outcome: Option<Outcome>,
) -> Result<DriveVerdict, String> {
    let trace = build_trace(frames, DEFAULT_DT).map_err(|e| e.to_string())?;
    let rho = |s: &ResolvedSpec| robustness(&s.formula, &trace, 0).map(|r| r.value()).map_err(|e| e.to_string());
    Ok(DriveVerdict {
        record,
        outcome,
        rho_spec: rho(spec)?,
        rho_no_collision: rho(collision)?,
        metrics: evaluate_trace(frames),
    })
}

/// Field-wise `after − before` over the numeric metrics present in both.
pub fn metrics_delta(before: &TraceMetrics, after: &TraceMetrics) -> BTreeMap<String, f64> {
    let (Value::Object(b), Value::Object(a)) = (json!(before), json!(after)) else {
        return BTreeMap::new();
    };
    b.iter()
        .filter_map(|(k, bv)| Some((k.clone(), a.get(k)?.as_f64()? - bv.as_f64()?)))
        .collect()
}

/// A candidate slot whose generation failed.
#[derive(Debug, Clone)]
struct Failure {
    msg: String,
    attempts: u32,
    /// Tokens spent on the rejected answers.
    usage: TokenUsage,
    cost_usd: f64,
}

impl Failure {
    fn new(e: RepairError, cfg: &BackendConfig) -> Self {
        let (attempts, usage) = match &e {
            RepairError::GenerationFailed { attempts, usage, .. } => (*attempts, *usage),
            _ => (1, TokenUsage::default()),
        };
        Failure {
            msg: e.to_string(),
            attempts,
            usage,
            cost_usd: cost_usd(usage.input, usage.output, cfg.price_in, cfg.price_out),
        }
    }
}

type Slot = Result<RepairCandidate, Failure>;

/// Serialized record, frames and outcome of one candidate replay.
type Replay = (String, Vec<RawRecordFrame>, Outcome);

/// Loads a previous run's candidates from `costs.json` and the `.mud` files it lists.
fn cached_candidates(dir: &Path, cfg: &PipelineConfig) -> Option<Vec<Slot>> {
    let ledger: CostLedger = serde_json::from_str(&fs::read_to_string(dir.join("costs.json")).ok()?).ok()?;
    if ledger.candidates.len() != cfg.n {
        return None;
    }
    let catalog = VocabularyCatalog::standard();
    let mut out = Vec::with_capacity(cfg.n);
    for e in ledger.candidates {
        let slot = match (&e.file, &e.error) {
            (Some(file), None) => {
                let program = parse_program(&fs::read_to_string(dir.join(file)).ok()?).ok()?;
                if !validate(&program, &catalog).is_empty() {
                    return None;
                }
                Ok(RepairCandidate {
                    raw_json: crate::mudrive::to_json(&program, &catalog).ok()?,
                    program,
                    attempts: e.attempts,
                    input_tokens: e.input_tokens,
                    output_tokens: e.output_tokens,
                    cost_usd: e.cost_usd,
                    backend: ledger.backend,
                    seed: e.seed,
                })
            }
            (_, Some(err)) => Err(Failure {
                msg: err.clone(),
                attempts: e.attempts,
                usage: TokenUsage {
                    input: e.input_tokens,
                    output: e.output_tokens,
                },
                cost_usd: e.cost_usd,
            }),
            (None, None) => return None,
        };
        out.push(slot);
    }
    Some(out)
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    dir: PathBuf,
    report: PipelineReport,
}

impl Run<'_> {
    fn stage(&mut self, stage: &str, status: StageStatus, detail: Option<String>) {
        if status == StageStatus::Failed {
            log::error!("{stage}: {}", detail.as_deref().unwrap_or(""));
        }
        self.report.stages.push(StageRecord {
            stage: stage.into(),
            status,
            detail,
        });
    }

    fn fail(&mut self, stage: &str, detail: String) {
        self.stage(stage, StageStatus::Failed, Some(detail));
        self.report.status = RunStatus::Error;
    }

    fn finish(self) -> Result<RunResult, PipelineError> {
        write(&self.dir, "report.json", &to_pretty(&self.report))?;
        Ok(RunResult {
            report: self.report,
            run_dir: self.dir,
        })
    }
}

/// Runs the whole repair pipeline once and writes `report.json` into the run directory.
/// Stage failures are recorded in the report; only configuration and I/O problems with
/// the run directory itself are returned as errors.
pub fn cmd_repair(cfg: &PipelineConfig, backend: &dyn Backend) -> Result<RunResult, PipelineError> {
    cfg.check()?;
    let inputs = prepare(cfg)?;
    let id = run_id(cfg, &inputs);
    let dir = cfg.out_dir.join(&id);
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let collision = ResolvedSpec::builtin(COLLISION_SPEC).expect("builtin");
    let mut run = Run {
        cfg,
        dir,
        report: PipelineReport {
            version: REPORT_VERSION,
            run_id: id,
            record_id: inputs.record_id.clone(),
            spec: inputs.spec.name.clone(),
            status: RunStatus::Unfixed,
            stages: Vec::new(),
            moments: None,
            prompt: None,
            baseline: None,
            candidates: Vec::new(),
            fix_rate: 0.0,
            backend_calls: 0,
            total_input_tokens: 0,
            total_output_tokens: 0,
            total_cost_usd: 0.0,
        },
    };
    let record_rel = write(&run.dir, "baseline.jsonl", &inputs.record_text)?;

    // analyse + localize
    let frames = match parse_record(&inputs.record_text) {
        Ok(f) => f,
        Err(e) => {
            run.fail("analyze", e.to_string());
            return run.finish();
        }
    };
    let trace = match build_trace(&frames, DEFAULT_DT) {
        Ok(t) => t,
        Err(e) => {
            run.fail("analyze", e.to_string());
            return run.finish();
        }
    };
    match verdict(&frames, &inputs.spec, &collision, record_rel, inputs.baseline_outcome) {
        Ok(v) => run.report.baseline = Some(v),
        Err(e) => {
            run.fail("analyze", e);
            return run.finish();
        }
    }
    run.stage("analyze", StageStatus::Ok, None);
    let ms = match locate(&inputs.spec.formula, &trace, cfg.delta) {
        Ok(ms) => ms,
        Err(e) => {
            run.fail("localize", e.to_string());
            return run.finish();
        }
    };
    run.report.moments = Some(summarize(&ms));
    write(&run.dir, "moments.json", &to_pretty(&ms))?;
    run.stage("localize", StageStatus::Ok, None);
    if ms.violation_step.is_none() {
        run.report.status = RunStatus::NoViolation;
        for stage in ["prompt", "generate", "replay"] {
            run.stage(stage, StageStatus::Skipped, Some("no violation".into()));
        }
        return run.finish();
    }

    // prompt
    let bundle = match repair_prompt(&inputs, &frames, &ms, &cfg.defaults) {
        Ok(b) => b,
        Err(e) => {
            run.fail("prompt", e.to_string());
            return run.finish();
        }
    };
    run.report.prompt = Some(write_prompt(&run.dir, &bundle)?);
    run.stage("prompt", StageStatus::Ok, None);

    // generate
    let slots = match cached_candidates(&run.dir, cfg) {
        Some(slots) => {
            log::info!("reusing stored candidates in {}", run.dir.display());
            slots
        }
        None => {
            let (slots, _) = batch_generate(
                &bundle,
                cfg.n,
                &cfg.backend_config,
                backend,
                &VocabularyCatalog::standard(),
                cfg.seed,
            );
            let slots: Vec<Slot> = slots.into_iter().map(|r| r.map_err(|e| Failure::new(e, &cfg.backend_config))).collect();
            write_candidates(&run.dir, &inputs.record_id, cfg, &slots)?;
            slots
        }
    };
    run.report.backend_calls = slots
        .iter()
        .map(|s| u64::from(s.as_ref().map_or_else(|f| f.attempts, |c| c.attempts)))
        .sum();
    let failed = slots.iter().filter(|s| s.is_err()).count();
    run.stage(
        "generate",
        StageStatus::Ok,
        (failed > 0).then(|| format!("{failed} of {} candidates failed", cfg.n)),
    );
    run.report.candidates = slots
        .iter()
        .enumerate()
        .map(|(i, slot)| candidate_row(i, cfg.seed + i as u64, &inputs.record_id, slot))
        .collect();
    for c in &run.report.candidates {
        run.report.total_input_tokens += c.input_tokens;
        run.report.total_output_tokens += c.output_tokens;
        run.report.total_cost_usd += c.cost_usd;
    }

    // replay
    let Some(script) = &inputs.script else {
        run.stage("replay", StageStatus::Skipped, Some("no scenario to replay".into()));
        run.report.status = RunStatus::Unverified;
        return run.finish();
    };
    let programs: Vec<(usize, &MuDriveProgram)> = slots
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.as_ref().ok().map(|c| (i, &c.program)))
        .collect();
    let replays: Vec<(usize, Result<Replay, String>)> = programs
        .par_iter()
        .map(|&(i, prog)| {
            let r = run_scenario(script, Some(prog), &run.cfg.defaults)
                .map(|sim| (record_to_string(&sim.frames), sim.frames, sim.outcome))
                .map_err(|e| e.to_string());
            (i, r)
        })
        .collect();
    let mut replay_errors = Vec::new();
    for (i, r) in replays {
        let outcome = r.and_then(|(text, frames, outcome)| {
            let rel = write(&run.dir, &format!("replays/cand_{i}.jsonl"), &text).map_err(|e| e.to_string())?;
            verdict(&frames, &inputs.spec, &collision, rel, Some(outcome))
        });
        let row = &mut run.report.candidates[i];
        match outcome {
            Ok(v) => {
                row.fixed = v.satisfied();
                if let (Some(before), Some(after)) = (
                    run.report.baseline.as_ref().and_then(|b| b.metrics.as_ref()),
                    v.metrics.as_ref(),
                ) {
                    row.metrics_delta = metrics_delta(before, after);
                }
                row.replay = Some(v);
            }
            Err(e) => {
                row.error = Some(e.clone());
                replay_errors.push(format!("cand_{i}: {e}"));
            }
        }
    }
    run.stage(
        "replay",
        if replay_errors.is_empty() { StageStatus::Ok } else { StageStatus::Failed },
        (!replay_errors.is_empty()).then(|| replay_errors.join("; ")),
    );
    let fixed = run.report.candidates.iter().filter(|c| c.fixed).count();
    run.report.fix_rate = fixed as f64 / cfg.n as f64;
    run.report.status = if fixed > 0 { RunStatus::Fixed } else { RunStatus::Unfixed };
    run.finish()
}

fn summarize(ms: &CriticalMoments) -> MomentsSummary {
    let t = |k: Option<usize>| k.map(|k| (k as f64 * ms.dt * 1e6).round() / 1e6);
    MomentsSummary {
        violation_step: ms.violation_step,
        near_miss_step: ms.near_miss_step,
        violation_t: t(ms.violation_step),
        near_miss_t: t(ms.near_miss_step),
        delta: ms.delta,
    }
}

/// The repair prompt for a located violation; the weather segment describes the
/// violation frame.
pub fn repair_prompt(
    inputs: &RunInputs,
    frames: &[RawRecordFrame],
    ms: &CriticalMoments,
    defaults: &PlannerParams,
) -> Result<PromptBundle, PromptError> {
    let weather = ms
        .violation_step
        .zip(frames.first())
        .and_then(|(k, f0)| nearest_frame(frames, f0.t + k as f64 * ms.dt))
        .map(|i| frames[i].weather.clone())
        .unwrap_or_default();
    build_prompt(
        ms,
        frames,
        &inputs.spec.name,
        &inputs.spec.prose,
        &weather,
        defaults,
        &inputs.record_id,
    )
}

/// Writes the bundle, its joined text and both images under `dir/prompt/`.
pub fn write_prompt(dir: &Path, bundle: &PromptBundle) -> Result<PromptArtifacts, PipelineError> {
    Ok(PromptArtifacts {
        bundle: write(dir, "prompt/bundle.json", &to_pretty(bundle))?,
        text: write(dir, "prompt/prompt.txt", &(bundle.text() + "\n"))?,
        near_miss_image: write(dir, "prompt/near_miss.svg", &bundle.images[0])?,
        violation_image: write(dir, "prompt/violation.svg", &bundle.images[1])?,
    })
}

fn candidate_file(record_id: &str, i: usize) -> String {
    format!("{record_id}/cand_{i}.mud")
}

fn write_candidates(
    dir: &Path,
    record_id: &str,
    cfg: &PipelineConfig,
    slots: &[Slot],
) -> Result<(), PipelineError> {
    let mut entries = Vec::with_capacity(slots.len());
    for (i, slot) in slots.iter().enumerate() {
        let seed = cfg.seed + i as u64;
        entries.push(match slot {
            Ok(c) => CostEntry {
                index: i,
                seed,
                file: Some(write(dir, &candidate_file(record_id, i), &c.source())?),
                attempts: c.attempts,
                input_tokens: c.input_tokens,
                output_tokens: c.output_tokens,
                cost_usd: c.cost_usd,
                error: None,
            },
            Err(f) => CostEntry {
                index: i,
                seed,
                file: None,
                attempts: f.attempts,
                input_tokens: f.usage.input,
                output_tokens: f.usage.output,
                cost_usd: f.cost_usd,
                error: Some(f.msg.clone()),
            },
        });
    }
    let ledger = CostLedger {
        backend: cfg.backend,
        model: cfg.backend_config.model.clone(),
        price_in: cfg.backend_config.price_in,
        price_out: cfg.backend_config.price_out,
        total_cost_usd: entries.iter().map(|e| e.cost_usd).sum(),
        candidates: entries,
    };
    write(dir, "costs.json", &to_pretty(&ledger))?;
    Ok(())
}

fn candidate_row(i: usize, seed: u64, record_id: &str, slot: &Slot) -> CandidateReport {
    match slot {
        Ok(c) => CandidateReport {
            index: i,
            seed,
            valid: true,
            program: Some(candidate_file(record_id, i)),
            attempts: c.attempts,
            input_tokens: c.input_tokens,
            output_tokens: c.output_tokens,
            cost_usd: c.cost_usd,
            error: None,
            replay: None,
            fixed: false,
            metrics_delta: BTreeMap::new(),
        },
        Err(f) => CandidateReport {
            index: i,
            seed,
            valid: false,
            program: None,
            attempts: f.attempts,
            input_tokens: f.usage.input,
            output_tokens: f.usage.output,
            cost_usd: f.cost_usd,
            error: Some(f.msg.clone()),
            replay: None,
            fixed: false,
            metrics_delta: BTreeMap::new(),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub near_miss_step: Option<usize>,
    pub violation_step: Option<usize>,
    /// Names of the rules in the first valid candidate.
    pub rules: Vec<String>,
    /// Whether any candidate's replay satisfies the property; `None` without a scenario.
    pub fixed: Option<bool>,
}

/// Localizes, prompts, generates and replays once per δ, without persisting artifacts.
pub fn cmd_sweep_delta(
    cfg: &PipelineConfig,
    deltas: &[f64],
    backend: &dyn Backend,
) -> Result<Vec<SweepRow>, PipelineError> {
    if deltas.is_empty() {
        return Err(PipelineError::Config("at least one delta is required".into()));
    }
    cfg.check()?;
    let inputs = prepare(cfg)?;
    let frames = parse_record(&inputs.record_text).map_err(|e| PipelineError::Config(e.to_string()))?;
    let trace = build_trace(&frames, DEFAULT_DT).map_err(|e| PipelineError::Config(e.to_string()))?;
    let collision = ResolvedSpec::builtin(COLLISION_SPEC).expect("builtin");
    let catalog = VocabularyCatalog::standard();
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let ms = locate(&inputs.spec.formula, &trace, delta).map_err(|e| PipelineError::Config(e.to_string()))?;
        let mut row = SweepRow {
            delta,
            near_miss_step: ms.near_miss_step,
            violation_step: ms.violation_step,
            rules: Vec::new(),
            fixed: None,
        };
        if ms.violation_step.is_some() {
            let bundle = repair_prompt(&inputs, &frames, &ms, &cfg.defaults)
                .map_err(|e| PipelineError::Config(e.to_string()))?;
            let (slots, _) = batch_generate(&bundle, cfg.n, &cfg.backend_config, backend, &catalog, cfg.seed);
            let programs: Vec<&MuDriveProgram> = slots.iter().filter_map(|s| s.as_ref().ok()).map(|c| &c.program).collect();
            row.rules = programs
                .first()
                .map(|p| p.rules.iter().map(|r| r.name.clone()).collect())
                .unwrap_or_default();
            if let Some(script) = &inputs.script {
                row.fixed = Some(programs.par_iter().any(|prog| {
                    run_scenario(script, Some(prog), &cfg.defaults)
                        .ok()
                        .and_then(|sim| verdict(&sim.frames, &inputs.spec, &collision, String::new(), None).ok())
                        .is_some_and(|v| v.satisfied())
                }));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

pub fn render_sweep(rows: &[SweepRow]) -> String {
    let mut out = String::from("delta  near_miss  violation  fixed  rules\n");
    for r in rows {
        let fixed = match r.fixed {
            Some(true) => "yes",
            Some(false) => "no",
            None => "-",
        };
        let _ = writeln!(
            out,
            "{:<6} {:<10} {:<10} {:<6} {}",
            r.delta,
            fmt_opt(r.near_miss_step),
            fmt_opt(r.violation_step),
            fixed,
            r.rules.join(" | ")
        );
    }
    out
}

/// Human-readable summary of a report.
pub fn render_report(r: &PipelineReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "run {}  record {}  spec {}", r.run_id, r.record_id, r.spec);
    let _ = writeln!(out, "status: {}", json!(r.status).as_str().unwrap_or("?"));
    for s in &r.stages {
        let _ = writeln!(
            out,
            "  {:<9} {:<8} {}",
            s.stage,
            json!(s.status).as_str().unwrap_or("?"),
            s.detail.as_deref().unwrap_or("")
        );
    }
    if let Some(m) = &r.moments {
        let _ = writeln!(
            out,
            "violation step {} (t={}s), near-miss step {} (t={}s), delta {}",
            fmt_opt(m.violation_step),
            fmt_opt(m.violation_t),
            fmt_opt(m.near_miss_step),
            fmt_opt(m.near_miss_t),
            m.delta
        );
    }
    if let Some(b) = &r.baseline {
        let _ = writeln!(
            out,
            "baseline: rho {:.3}, no_collision {:.3}",
            b.rho_spec, b.rho_no_collision
        );
    }
    if !r.candidates.is_empty() {
        let _ = writeln!(out, "  #  seed  valid  rho_after  no_collision  fixed  cost_usd");
        for c in &r.candidates {
            let (rho, nc) = c
                .replay
                .as_ref()
                .map_or(("-".to_string(), "-".to_string()), |v| {
                    (format!("{:.3}", v.rho_spec), format!("{:.3}", v.rho_no_collision))
                });
            let _ = writeln!(
                out,
                "{:>3}  {:>4}  {:<5}  {:>9}  {:>12}  {:<5}  {:.4}",
                c.index,
                c.seed,
                c.valid,
                rho,
                nc,
                c.fixed,
                c.cost_usd
            );
        }
    }
    let _ = writeln!(
        out,
        "fix rate {:.2}; tokens {} in / {} out; total cost ${:.4}",
        r.fix_rate, r.total_input_tokens, r.total_output_tokens, r.total_cost_usd
    );
    out
}
