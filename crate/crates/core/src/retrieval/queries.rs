use std::collections::{BTreeSet, HashSet};
use std::sync::LazyLock;

use regex::Regex;

use super::{QueryOrigin, RetrievalConfig, SearchQuery, SourceKind};
use crate::context::{Dependency, ErrorContext};
use crate::hypothesis::Hypothesis;
use crate::text::{frequency_rank, terms};
use crate::util::truncate_chars;

pub const MAX_QUERY_CHARS: usize = 256;

static PATHLIKE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r#"^['"`(]?(?:~|\.{1,2})?/?(?:[\w.+-]+/)+[\w.+-]*(?::\d+)*[:,'"`)]*$|^['"`(]?[\w.+-]+\.(?:c|h|cc|cpp|cxx|hpp|hh|py|pyi|go|mod)(?::\d+)*[:,'"`)]*$"#,
    )
    .unwrap()
});

/// Drops whitespace-separated words that look like file paths or `file:line` locations.
pub fn strip_paths(message: &str) -> String {
    message.split_whitespace().filter(|w| !PATHLIKE.is_match(w)).collect::<Vec<_>>().join(" ")
}

fn clip(text: &str) -> String {
    if text.chars().count() <= MAX_QUERY_CHARS {
        return text.to_string();
    }
    let cut = truncate_chars(text, MAX_QUERY_CHARS);
    cut.rsplit_once(' ').map_or(cut, |(head, _)| head).to_string()
}

fn bare_version(spec: &str) -> &str {
    spec.trim_start_matches(|c: char| "=<>~!^ ".contains(c)).split(',').next().unwrap_or("").trim()
}

/// The dependency mentioned by the message, else the first declared one.
fn top_dependency<'a>(ctx: &'a ErrorContext) -> Option<&'a Dependency> {
    let message = ctx.raw_message.to_lowercase();
    let deps = &ctx.project_meta.dependencies;
    deps.iter()
        .find(|d| {
            let short = d.name.rsplit('/').next().unwrap_or(&d.name).to_lowercase();
            short.len() > 2 && message.contains(&short)
        })
        .or_else(|| deps.first())
}

/// Up to three distinct terms of `text`, rarest first; ties keep text order.
fn rare_keywords(text: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut words: Vec<(usize, String)> = terms(text)
        .into_iter()
        .filter(|t| t.chars().any(char::is_alphabetic) && seen.insert(t.clone()))
        .enumerate()
        .collect();
    words.sort_by_key(|(pos, w)| (std::cmp::Reverse(frequency_rank(w).unwrap_or(usize::MAX)), *pos));
    words.into_iter().take(3).map(|(_, w)| w).collect()
}

/// Builds up to `config.n` queries in priority order: the message, the error
/// id in words, the message with the top dependency version, and rare
/// keywords of the hypothesis explanation. A query with the same term set as
/// an earlier one is dropped.
pub fn formulate_queries(ctx: &ErrorContext, hypo: Option<&Hypothesis>, config: &RetrievalConfig) -> Vec<SearchQuery> {
    let lang = ctx.language.query_word();
    let message = strip_paths(&ctx.raw_message);
    let mut candidates: Vec<(String, SourceKind, QueryOrigin)> = Vec::new();
    let message_query = if message.is_empty() { lang.to_string() } else { format!("{lang} {message}") };
    candidates.push((message_query, SourceKind::StackOverflow, QueryOrigin::Message));
    if !ctx.error_id.is_unclassified() {
        candidates.push((format!("{lang} {}", ctx.error_id.words()), SourceKind::WebSearch, QueryOrigin::ErrorId));
    }
    if let Some(dep) = top_dependency(ctx) {
        let version = bare_version(&dep.version_spec);
        let lib = if version.is_empty() { dep.name.clone() } else { format!("{} {version}", dep.name) };
        candidates.push((format!("{lang} {message} {lib}"), SourceKind::GitHubIssues, QueryOrigin::MetadataVersion));
    }
    if let Some(h) = hypo {
        let kws = rare_keywords(&h.explanation);
        if !kws.is_empty() {
            candidates.push((format!("{lang} {}", kws.join(" ")), SourceKind::WebSearch, QueryOrigin::HypothesisKeywords));
        }
    }

    let mut out: Vec<SearchQuery> = Vec::new();
    let mut covered: Vec<BTreeSet<String>> = Vec::new();
    for (text, target, origin) in candidates {
        let text = clip(text.trim());
        let mut key: BTreeSet<String> = terms(&text).into_iter().collect();
        key.insert(lang.to_string());
        if text.is_empty() || covered.contains(&key) {
            continue;
        }
        covered.push(key);
        out.push(SearchQuery { text, target, origin: BTreeSet::from([origin]) });
        if out.len() == config.n {
            break;
        }
    }
    out
}
