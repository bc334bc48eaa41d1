use std::collections::BTreeMap;

use super::{HypothesisError, HypothesisPrompt};
use crate::context::{ErrorContext, ProjectMetadata};

pub(crate) const INSTRUCTION: &str = "Instruction: Provide a concise textual explanation of the root cause. Then, provide a suggested code modification in 'diff -u' format. Estimate confidence.";

pub(crate) const FORMAT_CONTRACT: &str = "Answer with the explanation first, then the diff inside a ```diff fenced block, then a final line `Confidence: <number between 0 and 1>`.";

/// Rough token count: one token per four characters.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

pub fn render_metadata(meta: &ProjectMetadata) -> String {
    if meta.is_empty() {
        return "None".into();
    }
    let mut parts = Vec::new();
    if !meta.dependencies.is_empty() {
        let deps: Vec<String> = meta
            .dependencies
            .iter()
            .map(|d| if d.version_spec.is_empty() { d.name.clone() } else { format!("{} {}", d.name, d.version_spec) })
            .collect();
        parts.push(format!("dependencies: {}", deps.join(", ")));
    }
    if !meta.compiler_flags.is_empty() {
        parts.push(format!("compiler flags: {}", meta.compiler_flags.join(" ")));
    }
    if let Some(tool) = meta.build_tool {
        parts.push(format!("build tool: {tool:?}"));
    }
    if let Some(v) = &meta.language_version {
        parts.push(format!("language version: {v}"));
    }
    parts.join("; ")
}

/// The snippet of lines `[start, end]` of the window, with a location header.
fn render_snippet(ctx: &ErrorContext, start: u32, end: u32) -> String {
    let w = &ctx.ast_window;
    let lines: Vec<&str> = w.snippet.split('\n').collect();
    let body = lines[(start - w.line_range.0) as usize..=(end - w.line_range.0) as usize].join("\n");
    let scope = match &w.enclosing_symbol {
        Some(name) => format!(", in {name}"),
        None => String::new(),
    };
    format!("lines {start}-{end}{scope}\n```\n{body}\n```")
}

fn render(ctx: &ErrorContext, snippet: &str) -> (String, BTreeMap<String, String>) {
    let fields = [
        ("L_lang", ctx.language.display_name().to_string()),
        ("E_id", ctx.error_id.id.clone()),
        ("M_tok", ctx.message_tokens.join(" ")),
        ("F_path", ctx.file_path.display().to_string()),
        ("L_num", ctx.line.to_string()),
        ("C_AST", snippet.to_string()),
        ("P_meta", render_metadata(&ctx.project_meta)),
    ];
    let map: BTreeMap<String, String> = fields.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
    let rendered = format!(
        "Task: Analyze and resolve a compilation error.\n\
         Language: {}\n\
         Error Type: {}\n\
         Error Message: \"{}\"\n\
         File: {} at Line: {}\n\
         AST Context Snippet: {}\n\
         Relevant Project Metadata: {}\n\
         {INSTRUCTION}\n\
         {FORMAT_CONTRACT}\n",
        map["L_lang"], map["E_id"], map["M_tok"], map["F_path"], map["L_num"], map["C_AST"], map["P_meta"],
    );
    (rendered, map)
}

pub(crate) fn render_hypothesis_prompt(ctx: &ErrorContext, budget: usize) -> Result<HypothesisPrompt, HypothesisError> {
    let (floor, _) = render(ctx, "");
    let needed = estimate_tokens(&floor);
    if needed > budget {
        return Err(HypothesisError::BudgetTooSmall { needed, budget });
    }
    let (mut start, mut end) = ctx.ast_window.line_range;
    let line = ctx.line.clamp(start, end);
    loop {
        let (rendered, field_map) = render(ctx, &render_snippet(ctx, start, end));
        let token_estimate = estimate_tokens(&rendered);
        if token_estimate <= budget {
            return Ok(HypothesisPrompt { rendered, field_map, token_estimate });
        }
        if start == line && end == line {
            break;
        }
        if line - start >= end - line && start < line {
            start += 1;
        } else {
            end -= 1;
        }
    }
    let (rendered, field_map) = render(ctx, "");
    Ok(HypothesisPrompt { token_estimate: estimate_tokens(&rendered), rendered, field_map })
}
