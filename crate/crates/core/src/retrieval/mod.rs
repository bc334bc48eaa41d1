//! Web-augmented retrieval: query formulation, source fan-out, chunking,
//! evidence scoring and non-redundant selection.

mod chunk;
mod html;
mod http;
mod queries;
mod score;
mod sources;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use chunk::{chunk_document, MAX_CHUNK_CHARS};
pub use html::html_to_text;
pub use http::{GitHubIssuesClient, HttpSourceConfig, StackExchangeClient, WebSearchClient};
pub use queries::{formulate_queries, strip_paths, MAX_QUERY_CHARS};
pub use score::{evidence_id, reputation, score_evidence, select_evidence_set};
pub use sources::{
    fetch_all, search_source, DelayedClient, FailingClient, FixtureClient, RecordingClient, SearchOutcome,
    SourceClient, SourceError, Sources,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SourceKind {
    StackOverflow,
    GitHubIssues,
    WebSearch,
}

impl SourceKind {
    pub const ALL: [SourceKind; 3] = [SourceKind::StackOverflow, SourceKind::GitHubIssues, SourceKind::WebSearch];

    pub fn slug(self) -> &'static str {
        match self {
            SourceKind::StackOverflow => "stackoverflow",
            SourceKind::GitHubIssues => "github",
            SourceKind::WebSearch => "web",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

/// Which parts of the error context a query was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryOrigin {
    Message,
    ErrorId,
    HypothesisKeywords,
    MetadataVersion,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SearchQuery {
    pub text: String,
    pub target: SourceKind,
    pub origin: BTreeSet<QueryOrigin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResultDoc {
    pub url: String,
    pub title: String,
    pub body: String,
    pub source: SourceKind,
    /// Unix seconds.
    #[serde(default)]
    pub published_at: Option<i64>,
    /// Source-specific numbers such as `score` or `is_accepted`.
    #[serde(default)]
    pub source_signals: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreComponents {
    pub similarity: f64,
    pub keyword: f64,
    pub reputation: f64,
    pub recency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSnippet {
    pub id: String,
    pub text: String,
    pub url: String,
    pub title: String,
    pub source: SourceKind,
    pub published_at: Option<i64>,
    pub components: ScoreComponents,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedDuplicate {
    pub id: String,
    pub url: String,
    pub duplicate_of: String,
    pub jaccard: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSet {
    pub snippets: Vec<EvidenceSnippet>,
    pub selection_log: Vec<DroppedDuplicate>,
}

impl EvidenceSet {
    pub fn get(&self, id: &str) -> Option<&EvidenceSnippet> {
        self.snippets.iter().find(|s| s.id == id)
    }

    pub fn is_empty(&self) -> bool {
        self.snippets.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreWeights {
    pub similarity: f64,
    pub keyword: f64,
    pub reputation: f64,
    pub recency: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights { similarity: 0.45, keyword: 0.20, reputation: 0.20, recency: 0.15 }
    }
}

impl ScoreWeights {
    pub fn apply(&self, c: &ScoreComponents) -> f64 {
        self.similarity * c.similarity + self.keyword * c.keyword + self.reputation * c.reputation + self.recency * c.recency
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrievalConfig {
    /// Maximum number of queries.
    pub n: usize,
    /// Documents kept per query.
    pub k: usize,
    /// Evidence cap.
    pub m_prime: usize,
    pub weights: ScoreWeights,
    pub recency_half_life_days: f64,
    pub dedup_jaccard: f64,
    pub per_source_timeout_ms: u64,
    /// Hosts whose pages count as official documentation.
    pub official_domains: Vec<String>,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            n: 4,
            k: 5,
            m_prime: 8,
            weights: ScoreWeights::default(),
            recency_half_life_days: 730.0,
            dedup_jaccard: 0.8,
            per_source_timeout_ms: 2000,
            official_domains: [
                "docs.python.org",
                "go.dev",
                "pkg.go.dev",
                "golang.org",
                "en.cppreference.com",
                "cppreference.com",
                "gcc.gnu.org",
                "clang.llvm.org",
                "man7.org",
                "learn.microsoft.com",
            ]
            .map(String::from)
            .to_vec(),
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<(), String> {
        let w = &self.weights;
        let ws = [w.similarity, w.keyword, w.reputation, w.recency];
        if ws.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err("score weights must be non-negative".into());
        }
        if (ws.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err("score weights must sum to 1".into());
        }
        if self.n == 0 || self.k == 0 || self.m_prime == 0 {
            return Err("n, k and m_prime must be at least 1".into());
        }
        if !(self.dedup_jaccard > 0.0 && self.dedup_jaccard <= 1.0) {
            return Err("dedup_jaccard must be in (0, 1]".into());
        }
        if self.recency_half_life_days <= 0.0 {
            return Err("recency_half_life_days must be positive".into());
        }
        Ok(())
    }
}

/// Chunks, scores and selects evidence from fetched documents.
///
/// Documents are deduplicated by url (first occurrence wins) and empty bodies
/// are dropped. `now` is Unix seconds.
pub fn build_evidence(
    ctx: &crate::context::ErrorContext,
    docs: &[SearchResultDoc],
    config: &RetrievalConfig,
    now: i64,
) -> EvidenceSet {
    let mut seen = BTreeSet::new();
    let mut candidates = Vec::new();
    for doc in docs {
        if doc.body.trim().is_empty() || !seen.insert(doc.url.as_str()) {
            continue;
        }
        for (i, chunk) in chunk_document(doc).into_iter().enumerate() {
            let mut ev = score_evidence(&chunk, ctx, doc, config, now);
            ev.id = evidence_id(&doc.url, i);
            candidates.push(ev);
        }
    }
    select_evidence_set(candidates, config)
}
