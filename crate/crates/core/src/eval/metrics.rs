//! Explanation, evidence and ranking metrics.

use std::collections::{HashMap, HashSet};

/// Weight of recall against precision in ROUGE-L.
pub const ROUGE_BETA: f64 = 1.2;

fn tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_default() += 1;
    }
    counts
}

/// Sentence BLEU-4 over case-folded whitespace tokens, with add-one
/// smoothing of the 2- to 4-gram precisions and the usual brevity penalty.
pub fn bleu4(candidate: &str, reference: &str) -> f64 {
    let (c, r) = (tokens(candidate), tokens(reference));
    if c.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let cand = ngram_counts(&c, n);
        let refs = ngram_counts(&r, n);
        let matched: usize = cand.iter().map(|(g, k)| (*k).min(refs.get(g).copied().unwrap_or(0))).sum();
        let total = c.len().saturating_sub(n - 1);
        let smooth = if n == 1 { 0.0 } else { 1.0 };
        let p = (matched as f64 + smooth) / (total as f64 + smooth);
        if p == 0.0 {
            return 0.0;
        }
        log_sum += p.ln();
    }
    let bp = if c.len() < r.len() { (1.0 - r.len() as f64 / c.len() as f64).exp() } else { 1.0 };
    bp * (log_sum / 4.0).exp()
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { row[j + 1].max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// ROUGE-L F-measure over case-folded whitespace tokens, with β = 1.2.
pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    let (c, r) = (tokens(candidate), tokens(reference));
    if c.is_empty() || r.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(&c, &r) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let (p, rec) = (lcs / c.len() as f64, lcs / r.len() as f64);
    let b2 = ROUGE_BETA * ROUGE_BETA;
    (1.0 + b2) * p * rec / (rec + b2 * p)
}

/// Scheme, fragment and trailing slashes removed; host lowercased.
pub fn normalize_url(url: &str) -> String {
    let url = url.trim();
    let rest = url.split_once("://").map_or(url, |(_, r)| r);
    let rest = rest.split('#').next().unwrap_or("");
    let (host, path) = rest.split_once('/').map_or((rest, ""), |(h, p)| (h, p));
    let mut out = host.to_lowercase();
    if !path.is_empty() {
        out.push('/');
        out.push_str(path);
    }
    out.trim_end_matches('/').to_string()
}

/// NDCG@3 with binary gains against a set of relevant urls. A url repeated
/// in the ranking counts only at its first position.
pub fn ndcg_at_3<S: AsRef<str>>(ranked_urls: &[S], relevant_urls: &[S]) -> f64 {
    let relevant: HashSet<String> = relevant_urls.iter().map(|u| normalize_url(u.as_ref())).collect();
    if relevant.is_empty() {
        return 0.0;
    }
    let mut seen = HashSet::new();
    let ranked: Vec<String> =
        ranked_urls.iter().map(|u| normalize_url(u.as_ref())).filter(|u| seen.insert(u.clone())).take(3).collect();
    let dcg: f64 = ranked
        .iter()
        .enumerate()
        .filter(|(_, u)| relevant.contains(*u))
        .map(|(i, _)| 1.0 / (i as f64 + 2.0).log2())
        .sum();
    let ideal: f64 = (0..relevant.len().min(3)).map(|i| 1.0 / (i as f64 + 2.0).log2()).sum();
    dcg / ideal
}

/// Mean reciprocal rank; instances without a correct answer contribute 0.
pub fn mrr(first_correct_ranks: &[Option<u32>]) -> f64 {
    if first_correct_ranks.is_empty() {
        return 0.0;
    }
    let sum: f64 = first_correct_ranks.iter().map(|r| r.map_or(0.0, |r| 1.0 / r as f64)).sum();
    sum / first_correct_ranks.len() as f64
}
