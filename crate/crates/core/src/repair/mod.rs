//! Repair generation through a function-calling chat backend, with validation and retry.

mod live;
mod mock;

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::mudrive::{emit_schema, from_json, pretty_print, validate, MuDriveProgram, VocabularyCatalog};
use crate::promptgen::PromptBundle;

pub use live::{png_from_svg, LiveBackend, API_KEY_ENV};
pub use mock::{MockBackend, MockFault};

pub const TOOL_NAME: &str = "submit_driving_rules";
pub const DEFAULT_PRICE_IN: f64 = 10.0;
pub const DEFAULT_PRICE_OUT: f64 = 30.0;

/// USD for a request at per-million-token prices.
pub fn cost_usd(input_tokens: u64, output_tokens: u64, price_in: f64, price_out: f64) -> f64 {
    input_tokens as f64 * price_in / 1e6 + output_tokens as f64 * price_out / 1e6
}

/// Surrogate token count used by the offline backend: one token per four characters.
pub fn surrogate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Live,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub endpoint: String,
    pub model: String,
    pub price_in: f64,
    pub price_out: f64,
    pub max_retries: u32,
    pub temperature: f64,
    /// Replaces measured token counts per backend call; used to replay published usage.
    pub token_override: Option<TokenUsage>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4-turbo".into(),
            price_in: DEFAULT_PRICE_IN,
            price_out: DEFAULT_PRICE_OUT,
            max_retries: 3,
            temperature: 1.0,
            token_override: None,
        }
    }
}

impl BackendConfig {
    pub fn check(&self) -> Result<(), RepairError> {
        if !(self.price_in >= 0.0 && self.price_out >= 0.0) {
            return Err(RepairError::Config("prices must be >= 0".into()));
        }
        if self.max_retries < 1 {
            return Err(RepairError::Config("max_retries must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct TokenUsage {
    pub input: u64,
    pub output: u64,
}

/// One earlier attempt and what was wrong with it.
#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    pub call_id: String,
    pub arguments: String,
    pub problems: Vec<String>,
}

impl Correction {
    pub fn message(&self) -> String {
        format!(
            "The program you submitted is invalid:\n- {}\nCall {TOOL_NAME} again with a corrected program.",
            self.problems.join("\n- ")
        )
    }
}

pub struct ChatRequest<'a> {
    pub bundle: &'a PromptBundle,
    pub tool_schema: &'a Value,
    pub corrections: &'a [Correction],
    pub seed: u64,
    pub config: &'a BackendConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub call_id: String,
    /// Raw JSON text of the function-call arguments.
    pub arguments: String,
    pub usage: TokenUsage,
}

pub trait Backend: Sync {
    fn kind(&self) -> BackendKind;
    fn complete(&self, req: &ChatRequest<'_>) -> Result<ChatResponse, RepairError>;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RepairError {
    #[error("backend error: {0}")]
    Backend(String),
    #[error("no valid program after {attempts} attempt(s): {}", diagnostics.join("; "))]
    GenerationFailed {
        attempts: u32,
        diagnostics: Vec<String>,
        usage: TokenUsage,
    },
    #[error("configuration error: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairCandidate {
    pub program: MuDriveProgram,
    pub raw_json: Value,
    pub attempts: u32,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub cost_usd: f64,
    pub backend: BackendKind,
    pub seed: u64,
}

impl RepairCandidate {
    pub fn source(&self) -> String {
        pretty_print(&self.program)
    }
}

/// Queries `backend` until it returns a program that converts and validates cleanly,
/// feeding diagnostics back, for at most `cfg.max_retries` calls.
pub fn generate_repair(
    bundle: &PromptBundle,
    cfg: &BackendConfig,
    backend: &dyn Backend,
    catalog: &VocabularyCatalog,
    seed: u64,
) -> Result<RepairCandidate, RepairError> {
    cfg.check()?;
    let schema = emit_schema(catalog);
    let mut corrections: Vec<Correction> = Vec::new();
    let mut usage = TokenUsage::default();
    let mut last_problems = Vec::new();
    for attempt in 1..=cfg.max_retries {
        let req = ChatRequest {
            bundle,
            tool_schema: &schema,
            corrections: &corrections,
            seed,
            config: cfg,
        };
        let resp = match backend.complete(&req) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("attempt {attempt}: {e}");
                last_problems = vec![e.to_string()];
                if attempt == cfg.max_retries {
                    return Err(e);
                }
                continue;
            }
        };
        let used = cfg.token_override.unwrap_or(resp.usage);
        usage.input += used.input;
        usage.output += used.output;
        let problems = match serde_json::from_str::<Value>(&resp.arguments) {
            Err(e) => vec![format!("arguments are not valid JSON: {e}")],
            Ok(doc) => match from_json(&doc, catalog) {
                Err(e) => e.problems.iter().map(ToString::to_string).collect(),
                Ok(program) => {
                    let diags = validate(&program, catalog);
                    if diags.is_empty() {
                        return Ok(RepairCandidate {
                            program,
                            raw_json: doc,
                            attempts: attempt,
                            input_tokens: usage.input,
                            output_tokens: usage.output,
                            cost_usd: cost_usd(usage.input, usage.output, cfg.price_in, cfg.price_out),
                            backend: backend.kind(),
                            seed,
                        });
                    }
                    diags.iter().map(ToString::to_string).collect()
                }
            },
        };
        log::info!("attempt {attempt} rejected: {}", problems.join("; "));
        corrections.push(Correction {
            call_id: resp.call_id,
            arguments: resp.arguments,
            problems: problems.clone(),
        });
        last_problems = problems;
    }
    Err(RepairError::GenerationFailed {
        attempts: cfg.max_retries,
        diagnostics: last_problems,
        usage,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub requested: usize,
    pub succeeded: usize,
    pub distinct_programs: usize,
    pub total_cost_usd: f64,
}

/// `n` independent candidates using seeds `seed, seed+1, …`; failures stay in their slot.
pub fn batch_generate(
    bundle: &PromptBundle,
    n: usize,
    cfg: &BackendConfig,
    backend: &dyn Backend,
    catalog: &VocabularyCatalog,
    seed: u64,
) -> (Vec<Result<RepairCandidate, RepairError>>, BatchSummary) {
    let slots: Vec<_> = (0..n as u64)
        .into_par_iter()
        .map(|i| generate_repair(bundle, cfg, backend, catalog, seed + i))
        .collect();
    let ok: Vec<&RepairCandidate> = slots.iter().filter_map(|r| r.as_ref().ok()).collect();
    let distinct: BTreeSet<String> = ok.iter().map(|c| c.source()).collect();
    let summary = BatchSummary {
        requested: n,
        succeeded: ok.len(),
        distinct_programs: distinct.len(),
        total_cost_usd: ok.iter().map(|c| c.cost_usd).sum(),
    };
    (slots, summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_cost_cells() {
        let rows = [
            (7352, 179, 0.079),
            (7352, 163, 0.078),
            (7436, 121, 0.078),
            (7435, 185, 0.080),
            (7508, 97, 0.078),
            (7498, 81, 0.077),
            (7504, 123, 0.079),
            (7350, 82, 0.076),
        ];
        for (i, o, want) in rows {
            let c = cost_usd(i, o, DEFAULT_PRICE_IN, DEFAULT_PRICE_OUT);
            assert!((c - want).abs() < 0.001, "{i}/{o}: {c}");
        }
        assert!((cost_usd(7352, 179, 10.0, 30.0) - 0.07889).abs() < 1e-12);
    }

    #[test]
    fn surrogate_rounds_up() {
        assert_eq!(surrogate_tokens(""), 0);
        assert_eq!(surrogate_tokens("abcde"), 2);
        assert_eq!(surrogate_tokens("μμμμ"), 1);
    }
}
