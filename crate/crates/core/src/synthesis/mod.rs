//! Second pass: reconcile the first-pass hypothesis with web evidence,
//! recalibrate confidence and rank the resulting solutions.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::ErrorContext;
use crate::diff::{parse_unified_diff, UnifiedDiff};
use crate::hypothesis::{
    complete_with_retry, estimate_tokens, parse_completion, render_metadata, GenerationParams, GeneratorBackend,
    Hypothesis, HypothesisError,
};
use crate::retrieval::EvidenceSet;

static MARKER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[ev:([A-Za-z0-9_-]+)\]").unwrap());
static EVIDENCE_USED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^[\s*_]*evidence[- ]used[\s*_]*:(.*)$").unwrap());

pub const NO_EVIDENCE: &str = "No web evidence available.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisPrompt {
    pub rendered: String,
    pub included_evidence_ids: Vec<String>,
    pub token_estimate: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Provenance {
    Synthesized,
    HypothesisOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalSolution {
    /// Assigned by the caller that stores the solution; empty until then.
    #[serde(default)]
    pub id: String,
    pub fix: UnifiedDiff,
    /// May contain `[ev:<id>]` markers, each listed in `citations`.
    pub explanation: String,
    pub citations: Vec<String>,
    pub confidence: f64,
    pub rank: u32,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthesisError {
    #[error("synthesis prompt needs {needed} tokens without evidence; budget is {budget}")]
    BudgetTooSmall { needed: usize, budget: usize },
    #[error("synthesis backend unavailable: {0}")]
    BackendUnavailable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisConfig {
    pub prompt_budget: usize,
    pub params: GenerationParams,
    pub stated_weight: f64,
    pub agreement_weight: f64,
    /// Confidence multiplier for the hypothesis-only fallback.
    pub fallback_factor: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            prompt_budget: 6144,
            params: GenerationParams::default(),
            stated_weight: 0.6,
            agreement_weight: 0.4,
            fallback_factor: 0.8,
        }
    }
}

fn render_context(ctx: &ErrorContext) -> String {
    let w = &ctx.ast_window;
    format!(
        "Language: {}\nError Type: {}\nError Message: \"{}\"\nFile: {} at Line: {}\nAST Context Snippet: lines {}-{}\n```\n{}\n```\nRelevant Project Metadata: {}",
        ctx.language.display_name(),
        ctx.error_id.id,
        ctx.message_tokens.join(" "),
        ctx.file_path.display(),
        ctx.line,
        w.line_range.0,
        w.line_range.1,
        w.snippet,
        render_metadata(&ctx.project_meta),
    )
}

fn render_with(ctx: &ErrorContext, hypo: &Hypothesis, evidence: &str) -> String {
    format!(
        "Given original error context:\n{}\n, initial hypothesis: Fix='\n{}', Explanation='{}'.\n\
         Review web evidence:\n{}\n.\n\
         Synthesize to:\n\
         1. Confirm/refine explanation, citing evidence.\n\
         2. Confirm/refine code fix (diff). Prioritize better web-suggested approaches, explaining rationale.\n\
         3. Reconcile/highlight conflicting web evidence.\n\
         4. Provide overall confidence for the final solution.\n\
         Output: (1) refined diff, (2) synthesized explanation with citations, (3) utilized evidence IDs, (4) final confidence.\n\
         Answer with the explanation first, citing evidence inline as [ev:<id>], then the diff inside a ```diff fenced block, \
         then a line `Evidence-Used: <id>, <id>` and a final line `Confidence: <number between 0 and 1>`.\n",
        render_context(ctx),
        hypo.fix,
        hypo.explanation,
        evidence,
    )
}

fn render_snippet(s: &crate::retrieval::EvidenceSnippet) -> String {
    format!("[ev:{}] ({}, {}, score {:.2})\n{}\n", s.id, s.source, s.url, s.score, s.text)
}

/// Renders the synthesis prompt, including evidence snippets whole and in
/// score order until the token budget is reached.
pub fn render_synthesis_prompt(
    ctx: &ErrorContext,
    hypo: &Hypothesis,
    evidence: &EvidenceSet,
    budget: usize,
) -> Result<SynthesisPrompt, SynthesisError> {
    let bare = render_with(ctx, hypo, NO_EVIDENCE);
    let needed = estimate_tokens(&bare);
    if needed > budget {
        return Err(SynthesisError::BudgetTooSmall { needed, budget });
    }
    let mut ids = Vec::new();
    let mut block = String::new();
    let mut rendered = bare;
    for s in &evidence.snippets {
        let candidate = format!("{block}{}", render_snippet(s));
        let full = render_with(ctx, hypo, candidate.trim_end());
        if estimate_tokens(&full) > budget {
            break;
        }
        block = candidate;
        rendered = full;
        ids.push(s.id.clone());
    }
    Ok(SynthesisPrompt { token_estimate: estimate_tokens(&rendered), rendered, included_evidence_ids: ids })
}

/// `clamp(w_s·stated + w_a·mean cited score)`; agreement is 0 without citations.
pub fn recalibrate_confidence(stated: f64, citations: &[String], evidence: &EvidenceSet, config: &SynthesisConfig) -> f64 {
    let scores: Vec<f64> = citations.iter().filter_map(|id| evidence.get(id)).map(|s| s.score).collect();
    let agreement = if scores.is_empty() { 0.0 } else { scores.iter().sum::<f64>() / scores.len() as f64 };
    (config.stated_weight * stated + config.agreement_weight * agreement).clamp(0.0, 1.0)
}

struct Parsed {
    fix: UnifiedDiff,
    explanation: String,
    cited: Vec<String>,
    stated: Option<f64>,
}

fn interpret(text: &str) -> Result<Parsed, HypothesisError> {
    let p = parse_completion(text)?;
    let fix = parse_unified_diff(&p.diff_text).map_err(|e| HypothesisError::MalformedCompletion(e.to_string()))?;
    let mut cited = Vec::new();
    let mut explanation_lines = Vec::new();
    for line in p.explanation.lines() {
        match EVIDENCE_USED.captures(line) {
            Some(c) => cited.extend(split_ids(&c[1])),
            None => explanation_lines.push(line),
        }
    }
    for line in text.lines().filter(|l| EVIDENCE_USED.is_match(l)) {
        cited.extend(split_ids(&EVIDENCE_USED.captures(line).unwrap()[1]));
    }
    let explanation = explanation_lines.join("\n").trim().to_string();
    if explanation.is_empty() {
        return Err(HypothesisError::MalformedCompletion("no explanation before the diff".into()));
    }
    cited.extend(MARKER.captures_iter(&explanation).map(|c| c[1].to_string()));
    Ok(Parsed { fix, explanation, cited, stated: p.stated_confidence })
}

fn split_ids(list: &str) -> Vec<String> {
    list.split(|c: char| c == ',' || c.is_whitespace())
        .map(|t| t.trim_matches(|c: char| "[]`*".contains(c)))
        .map(|t| t.strip_prefix("ev:").unwrap_or(t))
        .filter(|t| !t.is_empty() && !t.eq_ignore_ascii_case("none"))
        .map(String::from)
        .collect()
}

/// The first-pass hypothesis as a solution, with discounted confidence.
pub fn hypothesis_only(hypo: &Hypothesis, config: &SynthesisConfig) -> FinalSolution {
    FinalSolution {
        id: String::new(),
        fix: hypo.fix.clone(),
        explanation: hypo.explanation.clone(),
        citations: Vec::new(),
        confidence: (hypo.confidence * config.fallback_factor).clamp(0.0, 1.0),
        rank: 1,
        provenance: Provenance::HypothesisOnly,
    }
}

/// Runs the synthesis backend and parses its answer.
///
/// Citations outside the prompt's evidence are dropped along with their
/// markers. An answer without a stated confidence uses the hypothesis's. If
/// the answer is still malformed after one retry, the hypothesis-only
/// solution is returned.
pub fn synthesize(
    prompt: &SynthesisPrompt,
    hypo: &Hypothesis,
    evidence: &EvidenceSet,
    backend: &dyn GeneratorBackend,
    config: &SynthesisConfig,
) -> Result<FinalSolution, SynthesisError> {
    let parsed = match complete_with_retry(&prompt.rendered, backend, &config.params, interpret) {
        Ok((p, _)) => p,
        Err(HypothesisError::BackendUnavailable(e)) => return Err(SynthesisError::BackendUnavailable(e)),
        Err(e) => {
            log::warn!("synthesis fell back to the hypothesis: {e}");
            return Ok(hypothesis_only(hypo, config));
        }
    };
    let offered: BTreeSet<&str> = prompt.included_evidence_ids.iter().map(String::as_str).collect();
    let mut citations: Vec<String> = Vec::new();
    for id in parsed.cited {
        if !offered.contains(id.as_str()) {
            log::warn!("dropping citation of unknown evidence {id}");
        } else if !citations.contains(&id) {
            citations.push(id);
        }
    }
    let explanation = MARKER
        .replace_all(&parsed.explanation, |c: &regex::Captures<'_>| {
            if offered.contains(&c[1]) { c[0].to_string() } else { String::new() }
        })
        .replace(" .", ".")
        .replace("  ", " ");
    let stated = parsed.stated.map_or(hypo.confidence, |s| s.clamp(0.0, 1.0));
    Ok(FinalSolution {
        id: String::new(),
        fix: parsed.fix,
        explanation,
        confidence: recalibrate_confidence(stated, &citations, evidence, config),
        citations,
        rank: 1,
        provenance: Provenance::Synthesized,
    })
}

/// Orders solutions by confidence, then Synthesized first, then fewer changed
/// lines, and assigns ranks 1..n.
pub fn rank_solutions(mut solutions: Vec<FinalSolution>) -> Vec<FinalSolution> {
    solutions.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then(a.provenance.cmp(&b.provenance))
            .then(a.fix.changed_lines().cmp(&b.fix.changed_lines()))
    });
    for (i, s) in solutions.iter_mut().enumerate() {
        s.rank = i as u32 + 1;
    }
    solutions
}
