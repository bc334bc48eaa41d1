use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::HypothesisError;

static CONFIDENCE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^[\s*_]*(?:overall |final )?confidence[\s*_]*:[\s*_]*([0-9]*\.?[0-9]+)\s*(%?)").unwrap()
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedCompletion {
    pub explanation: String,
    pub diff_text: String,
    pub stated_confidence: Option<f64>,
    /// Lines between the closing fence and the confidence line.
    pub trailer: String,
}

fn opens_diff(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with("```diff") || t.starts_with("```patch") || t.starts_with("```udiff")
}

/// Parses a stated confidence such as `0.9`, `85%` or `85`.
fn parse_confidence_value(number: &str, percent: bool) -> Option<f64> {
    let v: f64 = number.parse().ok()?;
    Some(if percent || v > 1.0 { v / 100.0 } else { v })
}

/// Splits a completion into explanation, the first ```diff block and the
/// trailing `Confidence:` value.
pub fn parse_completion(text: &str) -> Result<ParsedCompletion, HypothesisError> {
    let lines: Vec<&str> = text.lines().collect();
    let open = lines
        .iter()
        .position(|l| opens_diff(l))
        .ok_or_else(|| HypothesisError::MalformedCompletion("no ```diff block".into()))?;
    let close = lines[open + 1..]
        .iter()
        .position(|l| l.trim() == "```")
        .map(|i| open + 1 + i)
        .ok_or_else(|| HypothesisError::MalformedCompletion("unterminated ```diff block".into()))?;
    let explanation = lines[..open].join("\n").trim().to_string();
    if explanation.is_empty() {
        return Err(HypothesisError::MalformedCompletion("no explanation before the diff".into()));
    }
    let mut diff_text = lines[open + 1..close].join("\n");
    if !diff_text.is_empty() {
        diff_text.push('\n');
    }
    let tail = &lines[close + 1..];
    let conf_at = tail.iter().rposition(|l| CONFIDENCE.is_match(l));
    let stated_confidence = conf_at.and_then(|i| {
        let caps = CONFIDENCE.captures(tail[i])?;
        parse_confidence_value(&caps[1], !caps[2].is_empty())
    });
    let trailer = tail[..conf_at.unwrap_or(tail.len())].join("\n").trim().to_string();
    Ok(ParsedCompletion { explanation, diff_text, stated_confidence, trailer })
}

/// Logistic calibration of mean token log-probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfidenceCalibration {
    pub mu: f64,
    pub s: f64,
}

impl Default for ConfidenceCalibration {
    fn default() -> Self {
        ConfidenceCalibration { mu: -1.0, s: 0.5 }
    }
}

/// Stated confidence wins (clamped); otherwise a logistic over the mean
/// log-probability; otherwise 0.5.
pub fn score_confidence(logprobs: Option<&[f64]>, stated: Option<f64>, cal: &ConfidenceCalibration) -> f64 {
    if let Some(s) = stated.filter(|s| !s.is_nan()) {
        return s.clamp(0.0, 1.0);
    }
    match logprobs.filter(|lp| !lp.is_empty()) {
        Some(lp) => {
            let m = lp.iter().sum::<f64>() / lp.len() as f64;
            let v = 1.0 / (1.0 + (-(m - cal.mu) / cal.s).exp());
            if v.is_nan() { 0.5 } else { v }
        }
        None => 0.5,
    }
}
