//! Repair prompts: six text segments plus images of the near-miss and violation moments.

mod svg;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::localizer::{moment_frames, CriticalMoments, LocalizeError};
use crate::mudrive::{format_number, PlannerParams};
use crate::trace::{RawRecordFrame, Weather};

pub use svg::{kind_color, light_color, render_moment, MomentFeatures, ObstacleBand, PX_PER_M, VIEW_M};

pub const IDENTITY: &str = "Suppose you are a driver.";
pub const CLEAR_WEATHER: &str = "There is nothing noteworthy about the weather.";
pub const BACKGROUND: &str = "In these pictures, the left side shows the visualisation of the driving record. \
The right side displays the status of the traffic light, vehicle speed, and steering angle. \
The green boxes indicate detected vehicles, yellow boxes indicate detected pedestrians, \
blue boxes indicate detected bicycles, and purple boxes indicate unknown objects.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Identity,
    Weather,
    Background,
    Rule,
    Sequence,
    Default,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptMeta {
    pub gap_seconds: f64,
    pub spec_name: String,
    pub record_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub segments: Vec<Segment>,
    /// Near-miss image first, then the violation image.
    pub images: [String; 2],
    pub meta: PromptMeta,
}

impl PromptBundle {
    pub fn segment(&self, kind: SegmentKind) -> Option<&str> {
        self.segments.iter().find(|s| s.kind == kind).map(|s| s.text.as_str())
    }

    /// All text segments joined in order, one per line.
    pub fn text(&self) -> String {
        let parts: Vec<&str> = self.segments.iter().map(|s| s.text.as_str()).collect();
        parts.join("\n")
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PromptError {
    #[error(transparent)]
    Localize(#[from] LocalizeError),
}

pub fn weather_segment(w: &Weather) -> String {
    if !w.is_noteworthy() {
        return CLEAR_WEATHER.to_string();
    }
    let mut parts = Vec::new();
    for (name, v) in [("rain", w.rain), ("fog", w.fog), ("snow", w.snow)] {
        if v > 0.0 {
            parts.push(format!("{name} with intensity {}", format_number(round2(v))));
        }
    }
    parts.push(format!("visibility is {} metres", format_number(round2(w.visibility))));
    format!("Current weather: {}.", parts.join("; "))
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

pub fn rule_segment(rule_text: &str) -> String {
    format!("You are supposed to follow the following rule: {rule_text}")
}

pub fn sequence_segment(gap_seconds: f64) -> String {
    format!(
        "The second picture was taken {} seconds later than the first picture, capturing the moment when the rule violation occurred.",
        format_number(gap_seconds)
    )
}

pub fn default_segment(defaults: &PlannerParams) -> String {
    format!(
        "In the original ADS, the initial settings are: {}.",
        defaults.describe().join(", ")
    )
}

/// Assembles the prompt for one violation. `rule_text` is the prose of the property
/// (the law text for law properties); `weather` is the summary used for the weather segment.
pub fn build_prompt(
    ms: &CriticalMoments,
    frames: &[RawRecordFrame],
    spec_name: &str,
    rule_text: &str,
    weather: &Weather,
    defaults: &PlannerParams,
    record_id: &str,
) -> Result<PromptBundle, PromptError> {
    let mf = moment_frames(ms, frames)?;
    let seg = |kind, text: String| Segment { kind, text };
    let segments = vec![
        seg(SegmentKind::Identity, IDENTITY.to_string()),
        seg(SegmentKind::Weather, weather_segment(weather)),
        seg(SegmentKind::Background, BACKGROUND.to_string()),
        seg(SegmentKind::Rule, rule_segment(rule_text)),
        seg(SegmentKind::Sequence, sequence_segment(mf.gap_seconds)),
        seg(SegmentKind::Default, default_segment(defaults)),
    ];
    Ok(PromptBundle {
        segments,
        images: [
            render_moment(&mf.near_miss, defaults),
            render_moment(&mf.violation, defaults),
        ],
        meta: PromptMeta {
            gap_seconds: mf.gap_seconds,
            spec_name: spec_name.to_string(),
            record_id: record_id.to_string(),
        },
    })
}
