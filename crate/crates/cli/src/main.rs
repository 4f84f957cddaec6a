use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use drive_repair::localizer::locate_full;
use drive_repair::mudrive::{emit_schema, parse_program, validate, PlannerParams, VocabularyCatalog};
use drive_repair::pipeline::{
    cmd_repair, cmd_sweep_delta, load_scenario, load_spec, prepare, render_report, render_sweep,
    repair_prompt, write_prompt, PipelineConfig, PipelineReport,
};
use drive_repair::repair::{Backend, BackendKind, LiveBackend, MockBackend};
use drive_repair::simulator::{evaluate_trace, run_scenario};
use drive_repair::spec::robustness;
use drive_repair::trace::{build_trace, parse_record, record_to_string, DEFAULT_DT};

#[derive(Parser)]
#[command(name = "drive-repair", version, about = "Locate property violations in driving records and repair them with rule programs")]
struct Cli {
    /// TOML file with pipeline defaults; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone, Default)]
struct InputArgs {
    /// Driving record (JSONL).
    #[arg(long)]
    record: Option<PathBuf>,
    /// Benchmark scenario id (S1..S8) or scenario JSON file.
    #[arg(long)]
    scenario: Option<String>,
    /// Builtin property name or spec file.
    #[arg(long)]
    spec: Option<String>,
    /// Near-miss threshold.
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Mock,
    Live,
}

#[derive(Args, Clone, Default)]
struct BackendArgs {
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long)]
    model: Option<String>,
    /// Number of candidates to request.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Find the violation and near-miss steps of a record.
    Localize {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Build the repair prompt (text segments and two SVG images).
    Prompt {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "prompt-out")]
        out: PathBuf,
    },
    /// Run the full pipeline and write a report.
    Repair {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        backend: BackendArgs,
        /// Directory that holds per-run artifact directories.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the report JSON instead of the summary table.
        #[arg(long)]
        json: bool,
    },
    /// Scenario simulation.
    Sim {
        #[command(subcommand)]
        cmd: SimCommand,
    },
    /// Near-miss step and repair success for a range of thresholds.
    SweepDelta {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,5,10,15,20,25,30")]
        deltas: Vec<f64>,
        #[arg(long)]
        json: bool,
    },
    /// Show a stored report (a report.json file or a run directory).
    Report {
        path: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Rule-program tools.
    Mudrive {
        #[command(subcommand)]
        cmd: MudriveCommand,
    },
}

#[derive(Subcommand)]
enum SimCommand {
    /// Replay a scenario, optionally under a rule program.
    Run {
        #[arg(long)]
        scenario: String,
        /// Rule program (.mud) applied during the replay.
        #[arg(long)]
        repair: Option<PathBuf>,
        /// Property to check; defaults to the scenario's paired property.
        #[arg(long)]
        spec: Option<String>,
        /// Where to write the JSONL record.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the metrics JSON.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum MudriveCommand {
    /// Parse and validate a program.
    Check { file: PathBuf },
    /// Print the JSON Schema of the program format.
    Schema {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    let Some(path) = path else {
        return Ok(PipelineConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn apply_input(cfg: &mut PipelineConfig, a: &InputArgs) {
    if let Some(r) = &a.record {
        cfg.record = Some(r.clone());
    }
    if let Some(s) = &a.scenario {
        cfg.scenario = Some(s.clone());
    }
    if let Some(s) = &a.spec {
        cfg.spec = Some(s.clone());
    }
    if let Some(d) = a.delta {
        cfg.delta = d;
    }
}

fn apply_backend(cfg: &mut PipelineConfig, a: &BackendArgs) {
    if let Some(b) = a.backend {
        cfg.backend = match b {
            BackendArg::Mock => BackendKind::Mock,
            BackendArg::Live => BackendKind::Live,
        };
    }
    if let Some(m) = &a.model {
        cfg.backend_config.model = m.clone();
    }
    if let Some(n) = a.n {
        cfg.n = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
}

fn make_backend(kind: BackendKind) -> Result<Box<dyn Backend>> {
    Ok(match kind {
        BackendKind::Mock => Box::new(MockBackend::new()),
        BackendKind::Live => Box::new(LiveBackend::from_env()?),
    })
}

/// Writes to stdout, treating a closed pipe (e.g. `| head`) as success.
fn emit(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    emit(&(serde_json::to_string_pretty(v)? + "\n"))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn localize(cfg: &PipelineConfig) -> Result<u8> {
    let inputs = prepare(cfg)?;
    let frames = parse_record(&inputs.record_text)?;
    let trace = build_trace(&frames, DEFAULT_DT)?;
    let ms = locate_full(&inputs.spec.formula, &trace, cfg.delta)?;
    let rho: Vec<f64> = ms.prefix_rho.iter().map(|r| r.value()).collect();
    print_json(&json!({
        "record_id": inputs.record_id,
        "spec": inputs.spec.name,
        "violation_step": ms.violation_step,
        "near_miss_step": ms.near_miss_step,
        "delta": ms.delta,
        "dt": ms.dt,
        "rho_at_each": rho,
    }))?;
    Ok(0)
}

fn prompt(cfg: &PipelineConfig, out: &Path) -> Result<u8> {
    let inputs = prepare(cfg)?;
    let frames = parse_record(&inputs.record_text)?;
    let trace = build_trace(&frames, DEFAULT_DT)?;
    let ms = drive_repair::localizer::locate(&inputs.spec.formula, &trace, cfg.delta)?;
    if ms.violation_step.is_none() {
        println!("no violation of {} in {}", inputs.spec.name, inputs.record_id);
        return Ok(0);
    }
    let bundle = repair_prompt(&inputs, &frames, &ms, &cfg.defaults)?;
    let files = write_prompt(out, &bundle)?;
    for f in [files.bundle, files.text, files.near_miss_image, files.violation_image] {
        println!("{}", out.join(f).display());
    }
    Ok(0)
}

fn repair(cfg: &PipelineConfig, json_out: bool) -> Result<u8> {
    let backend = make_backend(cfg.backend)?;
    let run = cmd_repair(cfg, backend.as_ref())?;
    if json_out {
        print_json(&run.report)?;
    } else {
        emit(&format!("{}artifacts: {}\n", render_report(&run.report), run.run_dir.display()))?;
    }
    Ok(run.report.status.exit_code() as u8)
}

fn sim_run(
    scenario: &str,
    repair: Option<&Path>,
    spec: Option<&str>,
    out: Option<&Path>,
    metrics: Option<&Path>,
    defaults: &PlannerParams,
) -> Result<u8> {
    let script = load_scenario(scenario)?;
    let program = match repair {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let p = parse_program(&text).with_context(|| path.display().to_string())?;
            let diags = validate(&p, &VocabularyCatalog::standard());
            if !diags.is_empty() {
                for d in &diags {
                    eprintln!("{}: {d}", path.display());
                }
                bail!("{} does not validate", path.display());
            }
            Some(p)
        }
        None => None,
    };
    let run = run_scenario(&script, program.as_ref(), defaults)?;
    let spec = load_spec(spec.unwrap_or(&script.spec))?;
    let trace = build_trace(&run.frames, DEFAULT_DT)?;
    let rho = robustness(&spec.formula, &trace, 0)?.value();
    let m = evaluate_trace(&run.frames);
    if let Some(path) = out {
        write_file(path, &record_to_string(&run.frames))?;
    }
    let summary = json!({
        "scenario": script.id,
        "outcome": run.outcome,
        "spec": spec.name,
        "rho": rho,
        "metrics": m,
    });
    if let Some(path) = metrics {
        write_file(path, &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    }
    print_json(&summary)?;
    Ok(if rho > 0.0 { 0 } else { 2 })
}

fn report(path: &Path, json_out: bool) -> Result<u8> {
    let file = if path.is_dir() { path.join("report.json") } else { path.to_path_buf() };
    let r = PipelineReport::load(&file)?;
    if json_out {
        print_json(&r)?;
    } else {
        emit(&render_report(&r))?;
    }
    Ok(r.status.exit_code() as u8)
}

fn mudrive_check(file: &Path) -> Result<u8> {
    let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let program = match parse_program(&text) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{}: {e}", file.display());
            return Ok(1);
        }
    };
    let diags = validate(&program, &VocabularyCatalog::standard());
    if diags.is_empty() {
        println!("{}: ok ({} rule(s))", file.display(), program.rules.len());
        return Ok(0);
    }
    for d in &diags {
        eprintln!("{}: {d}", file.display());
    }
    Ok(1)
}

fn run(cli: Cli) -> Result<u8> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.cmd {
        Command::Localize { input } => {
            apply_input(&mut cfg, &input);
            localize(&cfg)
        }
        Command::Prompt { input, out } => {
            apply_input(&mut cfg, &input);
            prompt(&cfg, &out)
        }
        Command::Repair {
            input,
            backend,
            out,
            json,
        } => {
            apply_input(&mut cfg, &input);
            apply_backend(&mut cfg, &backend);
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            repair(&cfg, json)
        }
        Command::Sim {
            cmd:
                SimCommand::Run {
                    scenario,
                    repair,
                    spec,
                    out,
                    metrics,
                },
        } => sim_run(
            &scenario,
            repair.as_deref(),
            spec.as_deref(),
            out.as_deref(),
            metrics.as_deref(),
            &cfg.defaults,
        ),
        Command::SweepDelta {
            input,
            backend,
            deltas,
            json,
        } => {
            apply_input(&mut cfg, &input);
            apply_backend(&mut cfg, &backend);
            let b = make_backend(cfg.backend)?;
            let rows = cmd_sweep_delta(&cfg, &deltas, b.as_ref())?;
            if json {
                print_json(&rows)?;
            } else {
                emit(&render_sweep(&rows))?;
            }
            Ok(0)
        }
        Command::Report { path, json } => report(&path, json),
        Command::Mudrive { cmd } => match cmd {
            MudriveCommand::Check { file } => mudrive_check(&file),
            MudriveCommand::Schema { out } => {
                let text = serde_json::to_string_pretty(&emit_schema(&VocabularyCatalog::standard()))? + "\n";
                match out {
                    Some(path) => write_file(&path, &text)?,
                    None => emit(&text)?,
                }
                Ok(0)
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
