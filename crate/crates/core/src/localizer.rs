//! Violation and near-miss localization by sequential prefix search.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spec::{atom_table, signal_with_atoms, Formula, Robustness};
use crate::trace::{nearest_frame, RawRecordFrame, Trace, TraceError};

pub const DEFAULT_DELTA: f64 = 15.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocalizeError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("delta must be a non-negative number, got {0}")]
    BadDelta(f64),
    #[error("critical moment not found: {0}")]
    NotFound(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalMoments {
    pub violation_step: Option<usize>,
    pub near_miss_step: Option<usize>,
    pub delta: f64,
    /// ρ(φ, π^k) for every k examined, starting at 0.
    pub prefix_rho: Vec<Robustness>,
    pub dt: f64,
}

/// Evaluates ρ(φ, π^k) for any k, sharing atomic valuations across prefixes.
pub struct PrefixEvaluator<'a> {
    formula: &'a Formula,
    atoms: Vec<Vec<f64>>,
    len: usize,
    dt: f64,
}

impl<'a> PrefixEvaluator<'a> {
    pub fn new(formula: &'a Formula, trace: &Trace) -> Self {
        PrefixEvaluator {
            formula,
            atoms: atom_table(formula, trace.scenes()),
            len: trace.len(),
            dt: trace.dt(),
        }
    }

    pub fn at(&self, k: usize) -> Result<Robustness, TraceError> {
        if k >= self.len {
            return Err(TraceError::OutOfRange {
                step: k,
                len: self.len,
            });
        }
        Ok(Robustness(signal_with_atoms(self.formula, &self.atoms, k + 1, self.dt)[0]))
    }
}

/// ρ(φ, π^k): robustness at step 0 of the prefix ⟨π₀, …, π_k⟩.
pub fn prefix_robustness(f: &Formula, trace: &Trace, k: usize) -> Result<Robustness, TraceError> {
    PrefixEvaluator::new(f, trace).at(k)
}

/// First k with ρ(φ, π^k) ≤ δ (near miss) and first k with ρ(φ, π^k) ≤ 0 (violation).
/// The scan stops as soon as both are known.
pub fn locate(f: &Formula, trace: &Trace, delta: f64) -> Result<CriticalMoments, LocalizeError> {
    scan(f, trace, delta, false)
}

/// Like [`locate`] but records ρ for every prefix of the trace.
pub fn locate_full(f: &Formula, trace: &Trace, delta: f64) -> Result<CriticalMoments, LocalizeError> {
    scan(f, trace, delta, true)
}

fn scan(f: &Formula, trace: &Trace, delta: f64, full: bool) -> Result<CriticalMoments, LocalizeError> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(LocalizeError::BadDelta(delta));
    }
    let eval = PrefixEvaluator::new(f, trace);
    let mut ms = CriticalMoments {
        violation_step: None,
        near_miss_step: None,
        delta,
        prefix_rho: Vec::new(),
        dt: trace.dt(),
    };
    for k in 0..trace.len() {
        let rho = eval.at(k)?;
        ms.prefix_rho.push(rho);
        if ms.near_miss_step.is_none() && rho.value() <= delta {
            ms.near_miss_step = Some(k);
        }
        if ms.violation_step.is_none() && rho.value() <= 0.0 {
            ms.violation_step = Some(k);
        }
        if !full && ms.violation_step.is_some() && ms.near_miss_step.is_some() {
            break;
        }
    }
    Ok(ms)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentFrames {
    pub near_miss: RawRecordFrame,
    pub violation: RawRecordFrame,
    pub gap_seconds: f64,
}

/// Record frames closest to both critical moments and the time between them (0.1 s grid).
pub fn moment_frames(
    ms: &CriticalMoments,
    frames: &[RawRecordFrame],
) -> Result<MomentFrames, LocalizeError> {
    let near = ms.near_miss_step.ok_or(LocalizeError::NotFound("near-miss step"))?;
    let viol = ms.violation_step.ok_or(LocalizeError::NotFound("violation step"))?;
    let t0 = frames.first().ok_or(LocalizeError::NotFound("record frames"))?.t;
    let pick = |step: usize| {
        nearest_frame(frames, t0 + step as f64 * ms.dt)
            .map(|i| frames[i].clone())
            .ok_or(LocalizeError::NotFound("record frames"))
    };
    let gap = ((viol as f64 - near as f64) * ms.dt * 10.0).round() / 10.0;
    Ok(MomentFrames {
        near_miss: pick(near)?,
        violation: pick(viol)?,
        gap_seconds: gap,
    })
}
