//! First-pass repair: render the error context into a prompt, ask a
//! generator for an explanation, diff and confidence, and parse the answer.

mod backend;
mod completion;
mod prompt;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::ErrorContext;
use crate::diff::{parse_unified_diff, UnifiedDiff};

pub use backend::{
    prompt_hash, replay_from_dir, BackendError, Capabilities, Completion, FnBackend, GenerationParams,
    GeneratorBackend, HttpBackend, HttpBackendConfig, RecordingBackend, ReplayBackend, Usage,
};
pub use completion::{parse_completion, score_confidence, ConfidenceCalibration, ParsedCompletion};
pub use prompt::{estimate_tokens, render_metadata};

pub(crate) use prompt::FORMAT_CONTRACT;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisPrompt {
    pub rendered: String,
    /// Template placeholder → substituted value.
    pub field_map: BTreeMap<String, String>,
    pub token_estimate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub fix: UnifiedDiff,
    pub explanation: String,
    pub confidence: f64,
    pub backend_id: String,
    pub raw_completion: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HypothesisError {
    #[error("prompt needs {needed} tokens even without a snippet; budget is {budget}")]
    BudgetTooSmall { needed: usize, budget: usize },
    #[error("generator unavailable: {0}")]
    BackendUnavailable(String),
    #[error("malformed completion: {0}")]
    MalformedCompletion(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HypothesisConfig {
    pub prompt_budget: usize,
    pub params: GenerationParams,
    pub calibration: ConfidenceCalibration,
}

impl Default for HypothesisConfig {
    fn default() -> Self {
        HypothesisConfig {
            prompt_budget: 3072,
            params: GenerationParams::default(),
            calibration: ConfidenceCalibration::default(),
        }
    }
}

/// Renders the first-pass prompt, trimming the code snippet around the error
/// line when the estimate exceeds `budget` tokens.
pub fn render_hypothesis_prompt(ctx: &ErrorContext, budget: usize) -> Result<HypothesisPrompt, HypothesisError> {
    prompt::render_hypothesis_prompt(ctx, budget)
}

/// Text appended to a prompt when its first answer could not be parsed.
pub fn format_reminder(prompt: &str, problem: &str) -> String {
    format!("{prompt}\nYour previous answer could not be used ({problem}). {FORMAT_CONTRACT}\n")
}

fn interpret(text: &str) -> Result<(ParsedCompletion, UnifiedDiff), HypothesisError> {
    let parsed = parse_completion(text)?;
    let diff = parse_unified_diff(&parsed.diff_text).map_err(|e| HypothesisError::MalformedCompletion(e.to_string()))?;
    Ok((parsed, diff))
}

/// Calls `backend` once, retrying once with a format reminder if the answer
/// does not parse.
pub(crate) fn complete_with_retry<T>(
    prompt: &str,
    backend: &dyn GeneratorBackend,
    params: &GenerationParams,
    interpret: impl Fn(&str) -> Result<T, HypothesisError>,
) -> Result<(T, Completion), HypothesisError> {
    let first = backend.complete(prompt, params).map_err(|e| HypothesisError::BackendUnavailable(e.to_string()))?;
    let problem = match interpret(&first.text) {
        Ok(v) => return Ok((v, first)),
        Err(HypothesisError::MalformedCompletion(p)) => p,
        Err(e) => return Err(e),
    };
    log::debug!("retrying after malformed completion: {problem}");
    let second = backend
        .complete(&format_reminder(prompt, &problem), params)
        .map_err(|_| HypothesisError::MalformedCompletion(problem))?;
    interpret(&second.text).map(|v| (v, second))
}

/// One generator call (plus at most one format retry) parsed into a [`Hypothesis`].
pub fn generate_hypothesis(
    prompt: &HypothesisPrompt,
    backend: &dyn GeneratorBackend,
    config: &HypothesisConfig,
) -> Result<Hypothesis, HypothesisError> {
    let ((parsed, fix), completion) = complete_with_retry(&prompt.rendered, backend, &config.params, interpret)?;
    let logprobs = completion.logprobs.as_deref().filter(|_| backend.capabilities().supports_logprobs);
    Ok(Hypothesis {
        fix,
        explanation: parsed.explanation,
        confidence: score_confidence(logprobs, parsed.stated_confidence, &config.calibration),
        backend_id: backend.identity(),
        raw_completion: completion.text,
    })
}
