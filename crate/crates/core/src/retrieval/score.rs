use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use super::{DroppedDuplicate, EvidenceSet, EvidenceSnippet, RetrievalConfig, ScoreComponents, SearchResultDoc, SourceKind};
use crate::context::ErrorContext;
use crate::text::{identifiers, jaccard, terms, word_ngrams};
use crate::util::short_hash;

const SECONDS_PER_DAY: f64 = 86_400.0;

/// Stable id of the `index`-th chunk of the document at `url`.
pub fn evidence_id(url: &str, index: usize) -> String {
    short_hash(format!("{url}#{index}").as_bytes(), 8)
}

fn tf(tokens: impl IntoIterator<Item = String>) -> HashMap<String, f64> {
    let mut m = HashMap::new();
    for t in tokens {
        *m.entry(t).or_insert(0.0) += 1.0;
    }
    m
}

fn cosine(a: &HashMap<String, f64>, b: &HashMap<String, f64>) -> f64 {
    let dot: f64 = a.iter().filter_map(|(k, x)| b.get(k).map(|y| x * y)).sum();
    let na = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(0.0, 1.0)
}

fn host(url: &str) -> &str {
    let rest = url.split_once("://").map_or(url, |(_, r)| r);
    rest.split(['/', '?', '#']).next().unwrap_or(rest).rsplit('@').next().unwrap_or(rest)
}

/// Source reputation of a document.
pub fn reputation(doc: &SearchResultDoc, config: &RetrievalConfig) -> f64 {
    let h = host(&doc.url).trim_start_matches("www.").to_ascii_lowercase();
    let official =
        config.official_domains.iter().any(|d| h == *d || h.ends_with(&format!(".{d}")));
    if official {
        return 1.0;
    }
    match doc.source {
        SourceKind::StackOverflow => {
            if doc.source_signals.get("is_accepted").is_some_and(|v| *v > 0.0) {
                0.9
            } else {
                0.7
            }
        }
        SourceKind::GitHubIssues => 0.8,
        SourceKind::WebSearch => 0.5,
    }
}

/// Scores one snippet of `doc` against the error context. `now` is Unix seconds.
pub fn score_evidence(
    snippet_text: &str,
    ctx: &ErrorContext,
    doc: &SearchResultDoc,
    config: &RetrievalConfig,
    now: i64,
) -> EvidenceSnippet {
    let snippet_terms = terms(snippet_text);
    let mut reference = terms(&ctx.raw_message);
    reference.extend(identifiers(&ctx.ast_window.snippet));
    let similarity = cosine(&tf(snippet_terms.iter().cloned()), &tf(reference));

    let message_terms: HashSet<String> = ctx.message_tokens.iter().flat_map(|t| terms(t)).collect();
    let snippet_set: HashSet<&String> = snippet_terms.iter().collect();
    let keyword = if message_terms.is_empty() {
        0.0
    } else {
        message_terms.iter().filter(|t| snippet_set.contains(t)).count() as f64 / message_terms.len() as f64
    };

    let recency = match doc.published_at {
        Some(at) => {
            let age_days = (now - at).max(0) as f64 / SECONDS_PER_DAY;
            2f64.powf(-age_days / config.recency_half_life_days)
        }
        None => 0.5,
    };
    let components = ScoreComponents { similarity, keyword, reputation: reputation(doc, config), recency };
    EvidenceSnippet {
        id: evidence_id(&doc.url, 0),
        text: snippet_text.to_string(),
        url: doc.url.clone(),
        title: doc.title.clone(),
        source: doc.source,
        published_at: doc.published_at,
        score: config.weights.apply(&components).clamp(0.0, 1.0),
        components,
    }
}

/// Ranking order: score descending, then newer first, then url, then id.
pub(crate) fn rank_order(a: &EvidenceSnippet, b: &EvidenceSnippet) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| b.published_at.unwrap_or(i64::MIN).cmp(&a.published_at.unwrap_or(i64::MIN)))
        .then_with(|| a.url.cmp(&b.url))
        .then_with(|| a.id.cmp(&b.id))
}

/// Greedily admits candidates in rank order while they stay below the
/// 5-gram Jaccard threshold against everything admitted, up to `m_prime`.
pub fn select_evidence_set(mut candidates: Vec<EvidenceSnippet>, config: &RetrievalConfig) -> EvidenceSet {
    candidates.sort_by(rank_order);
    let mut set = EvidenceSet::default();
    let mut grams: Vec<HashSet<Vec<String>>> = Vec::new();
    for cand in candidates {
        if set.snippets.len() == config.m_prime {
            break;
        }
        let g = word_ngrams(&cand.text, 5);
        let worst = grams
            .iter()
            .enumerate()
            .map(|(i, other)| (i, jaccard(&g, other)))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        match worst {
            Some((i, j)) if j >= config.dedup_jaccard => set.selection_log.push(DroppedDuplicate {
                id: cand.id.clone(),
                url: cand.url.clone(),
                duplicate_of: set.snippets[i].id.clone(),
                jaccard: j,
            }),
            _ => {
                grams.push(g);
                set.snippets.push(cand);
            }
        }
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snippet(id: &str, text: &str, score: f64, published_at: Option<i64>) -> EvidenceSnippet {
        EvidenceSnippet {
            id: id.into(),
            text: text.into(),
            url: format!("https://example.org/{id}"),
            title: String::new(),
            source: SourceKind::WebSearch,
            published_at,
            components: ScoreComponents { similarity: 0.0, keyword: 0.0, reputation: 0.0, recency: 0.0 },
            score,
        }
    }

    #[test]
    fn weighted_sum() {
        let c = ScoreComponents { similarity: 0.5, keyword: 0.5, reputation: 0.7, recency: 0.5 };
        assert!((RetrievalConfig::default().weights.apply(&c) - 0.54).abs() < 1e-12);
    }

    #[test]
    fn identical_text_dropped() {
        let text = "add the missing semicolon at the end of the statement";
        let set = select_evidence_set(
            vec![snippet("a", text, 0.9, None), snippet("b", text, 0.8, None)],
            &RetrievalConfig::default(),
        );
        assert_eq!(set.snippets.len(), 1);
        assert_eq!(set.snippets[0].id, "a");
        assert_eq!(set.selection_log[0].duplicate_of, "a");
        assert_eq!(set.selection_log[0].jaccard, 1.0);
    }

    #[test]
    fn ties_prefer_newer_then_url() {
        let set = select_evidence_set(
            vec![
                snippet("c", "gamma one two three four five", 0.5, None),
                snippet("b", "beta one two three four five", 0.5, Some(10)),
                snippet("a", "alpha one two three four five", 0.5, None),
            ],
            &RetrievalConfig::default(),
        );
        let ids: Vec<_> = set.snippets.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["b", "a", "c"]);
    }

    #[test]
    fn cap_at_m_prime() {
        let cands: Vec<_> = (0..12).map(|i| snippet(&format!("s{i:02}"), &format!("distinct text number {i} here"), i as f64 / 12.0, None)).collect();
        let set = select_evidence_set(cands, &RetrievalConfig::default());
        assert_eq!(set.snippets.len(), 8);
        assert!(set.snippets.windows(2).all(|w| w[0].score >= w[1].score));
        assert!(select_evidence_set(Vec::new(), &RetrievalConfig::default()).is_empty());
    }

    #[test]
    fn reputation_table() {
        let cfg = RetrievalConfig::default();
        let mut d = SearchResultDoc {
            url: "https://docs.python.org/3/library/exceptions.html".into(),
            title: String::new(),
            body: String::new(),
            source: SourceKind::WebSearch,
            published_at: None,
            source_signals: Default::default(),
        };
        assert_eq!(reputation(&d, &cfg), 1.0);
        d.url = "https://blog.example.com/x".into();
        assert_eq!(reputation(&d, &cfg), 0.5);
        d.source = SourceKind::GitHubIssues;
        assert_eq!(reputation(&d, &cfg), 0.8);
        d.source = SourceKind::StackOverflow;
        assert_eq!(reputation(&d, &cfg), 0.7);
        d.source_signals.insert("is_accepted".into(), 1.0);
        assert_eq!(reputation(&d, &cfg), 0.9);
    }
}
