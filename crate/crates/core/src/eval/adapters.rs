//! Repair systems under evaluation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, LazyLock};

use regex::Regex;

use super::BenchmarkInstance;
use crate::context::{assemble_error_context, ErrorContext, ExtractionConfig};
use crate::diagnostics::{detect_error_signature, RawCapture};
use crate::diff::{render_diff, UnifiedDiff};
use crate::hypothesis::{generate_hypothesis, render_hypothesis_prompt, replay_from_dir, GeneratorBackend, HypothesisConfig};
use crate::pipeline::{Pipeline, PipelineConfig, RepairOutcome};
use crate::retrieval::{chunk_document, SearchResultDoc, SourceKind, Sources};
use crate::synthesis::{FinalSolution, Provenance};
use crate::text::terms;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdapterOutput {
    /// Ranked, best first; may be empty.
    pub solutions: Vec<FinalSolution>,
    /// Evidence urls, best first.
    pub evidence_ranking: Vec<String>,
}

pub trait SystemAdapter: Send + Sync {
    fn identity(&self) -> String;
    /// Whether the system writes explanations worth scoring.
    fn explains(&self) -> bool {
        true
    }
    /// Whether the system ranks web evidence.
    fn retrieves(&self) -> bool {
        false
    }
    fn repair(&self, instance: &BenchmarkInstance) -> AdapterOutput;
}

/// The context the pipeline would build from the instance's recorded output.
pub fn instance_context(instance: &BenchmarkInstance, config: &ExtractionConfig) -> Result<ErrorContext, String> {
    let capture = RawCapture::recorded(instance.build_command(), 1, "", instance.error_message.as_bytes());
    let (parsed, first) = detect_error_signature(&capture).ok_or("no error in recorded output")?;
    assemble_error_context(
        &capture,
        &parsed.diagnostics[first],
        &instance.erroneous_code,
        instance.project_context.clone(),
        config,
    )
    .map_err(|e| e.to_string())
}

fn solution(fix: UnifiedDiff, explanation: String, confidence: f64, provenance: Provenance) -> FinalSolution {
    FinalSolution { id: String::new(), fix, explanation, citations: vec![], confidence, rank: 1, provenance }
}

/// Returns the ground truth; the upper bound.
pub struct OracleAdapter;

impl SystemAdapter for OracleAdapter {
    fn identity(&self) -> String {
        "oracle".into()
    }
    fn retrieves(&self) -> bool {
        true
    }
    fn repair(&self, inst: &BenchmarkInstance) -> AdapterOutput {
        AdapterOutput {
            solutions: vec![solution(inst.ground_truth_diff.clone(), inst.reference_explanation.clone(), 1.0, Provenance::Synthesized)],
            evidence_ranking: inst.verified_urls.clone(),
        }
    }
}

/// Proposes the empty diff; the lower bound.
pub struct NullAdapter;

impl SystemAdapter for NullAdapter {
    fn identity(&self) -> String {
        "null".into()
    }
    fn repair(&self, _: &BenchmarkInstance) -> AdapterOutput {
        AdapterOutput { solutions: vec![solution(UnifiedDiff::identity(), String::new(), 0.0, Provenance::HypothesisOnly)], evidence_ranking: vec![] }
    }
}

static EXPECTED_TOKEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"expected (?:',' or )?'([;:])'").unwrap());
static SUGGESTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)did you mean:? '([^']+)'\??").unwrap());
static QUOTED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"'([^']+)'").unwrap());
static ALTERNATIVE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)was not declared in this scope\n.*?suggested alternatives?:.*?note:\s+'([^']+)'").unwrap());
static GO_UNUSED_IMPORT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"^"[^"]+" imported and not used"#).unwrap());

/// Pattern-matched quick fixes of the kind editors offer: insert an expected
/// `;` or `:`, accept the compiler's "did you mean" suggestion, or delete an
/// unused Go import.
pub struct IdeStdAdapter;

impl IdeStdAdapter {
    fn quick_fix(inst: &BenchmarkInstance) -> Option<(String, String)> {
        let capture = RawCapture::recorded(inst.build_command(), 1, "", inst.error_message.as_bytes());
        let (parsed, first) = detect_error_signature(&capture)?;
        let diag = &parsed.diagnostics[first];
        let mut lines: Vec<String> = inst.erroneous_code.lines().map(String::from).collect();
        let idx = (diag.line as usize).checked_sub(1).filter(|i| *i < lines.len())?;
        let line = lines[idx].clone();
        let note;
        let suggestion = SUGGESTION
            .captures(&diag.message)
            .or_else(|| ALTERNATIVE.captures(&inst.error_message))
            .map(|c| c[1].to_string());
        if let Some(c) = EXPECTED_TOKEN.captures(&diag.message) {
            let tok = &c[1];
            // gcc points at the token after the gap; when that token starts
            // its line the gap ends the previous non-blank line.
            let starts_line = diag.column.is_some_and(|col| line.chars().take(col as usize - 1).all(char::is_whitespace));
            let target = if starts_line { (0..idx).rev().find(|i| !lines[*i].trim().is_empty())? } else { idx };
            let text = lines[target].trim_end().to_string();
            if text.ends_with(tok) {
                return None;
            }
            lines[target] = format!("{text}{tok}");
            note = format!("Insert the expected '{tok}'.");
        } else if let Some(suggestion) = suggestion {
            let wrong = QUOTED
                .captures_iter(&diag.message)
                .map(|c| c[1].to_string())
                .filter(|w| *w != suggestion)
                .find(|w| Regex::new(&format!(r"\b{}\b", regex::escape(w))).unwrap().is_match(&line))?;
            let re = Regex::new(&format!(r"\b{}\b", regex::escape(&wrong))).unwrap();
            lines[idx] = re.replace(&line, regex::NoExpand(&suggestion)).into_owned();
            note = format!("Replace '{wrong}' with '{suggestion}'.");
        } else if GO_UNUSED_IMPORT.is_match(&diag.message) {
            lines.remove(idx);
            note = "Remove the unused import.".to_string();
        } else {
            return None;
        }
        let mut fixed = lines.join("\n");
        if inst.erroneous_code.ends_with('\n') {
            fixed.push('\n');
        }
        Some((fixed, note))
    }
}

impl SystemAdapter for IdeStdAdapter {
    fn identity(&self) -> String {
        "ide-std".into()
    }
    fn explains(&self) -> bool {
        false
    }
    fn repair(&self, inst: &BenchmarkInstance) -> AdapterOutput {
        let solutions = Self::quick_fix(inst)
            .map(|(fixed, note)| {
                let fix = render_diff(&inst.erroneous_code, &fixed, &inst.file_name());
                vec![solution(fix, note, 0.5, Provenance::HypothesisOnly)]
            })
            .unwrap_or_default();
        AdapterOutput { solutions, evidence_ranking: vec![] }
    }
}

/// The first generation pass alone.
pub struct LlmCoreOnlyAdapter {
    backend: Arc<dyn GeneratorBackend>,
    config: PipelineConfig,
}

impl LlmCoreOnlyAdapter {
    pub fn new(backend: Arc<dyn GeneratorBackend>, config: PipelineConfig) -> Self {
        LlmCoreOnlyAdapter { backend, config }
    }
}

impl SystemAdapter for LlmCoreOnlyAdapter {
    fn identity(&self) -> String {
        "llm-core-only".into()
    }
    fn repair(&self, inst: &BenchmarkInstance) -> AdapterOutput {
        let hc = &self.config.hypothesis;
        let hypo = instance_context(inst, &self.config.extraction).and_then(|ctx| {
            let prompt = render_hypothesis_prompt(&ctx, hc.prompt_budget).map_err(|e| e.to_string())?;
            generate_hypothesis(&prompt, self.backend.as_ref(), hc).map_err(|e| e.to_string())
        });
        match hypo {
            Ok(h) => AdapterOutput {
                solutions: vec![solution(h.fix, h.explanation, h.confidence, Provenance::HypothesisOnly)],
                evidence_ranking: vec![],
            },
            Err(e) => {
                log::warn!("{}: {e}", inst.id);
                AdapterOutput::default()
            }
        }
    }
}

/// Okapi BM25 over a fixed passage collection.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    passages: Vec<(String, String)>,
    tf: Vec<HashMap<String, usize>>,
    lengths: Vec<usize>,
    df: HashMap<String, usize>,
    avg_len: f64,
    pub k1: f64,
    pub b: f64,
}

impl Bm25Index {
    /// `passages` are `(url, text)` pairs.
    pub fn new(passages: Vec<(String, String)>) -> Self {
        let mut df: HashMap<String, usize> = HashMap::new();
        let mut tf = Vec::with_capacity(passages.len());
        let mut lengths = Vec::with_capacity(passages.len());
        for (_, text) in &passages {
            let ts = terms(text);
            lengths.push(ts.len());
            let mut counts: HashMap<String, usize> = HashMap::new();
            for t in ts {
                *counts.entry(t).or_default() += 1;
            }
            for t in counts.keys() {
                *df.entry(t.clone()).or_default() += 1;
            }
            tf.push(counts);
        }
        let avg_len = if lengths.is_empty() { 0.0 } else { lengths.iter().sum::<usize>() as f64 / lengths.len() as f64 };
        Bm25Index { passages, tf, lengths, df, avg_len, k1: 1.2, b: 0.75 }
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }

    pub fn score(&self, query: &str, i: usize) -> f64 {
        let n = self.passages.len() as f64;
        let q: HashSet<String> = terms(query).into_iter().collect();
        q.iter()
            .map(|t| {
                let f = *self.tf[i].get(t).unwrap_or(&0) as f64;
                if f == 0.0 {
                    return 0.0;
                }
                let df = self.df[t] as f64;
                let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
                let norm = 1.0 - self.b + self.b * self.lengths[i] as f64 / self.avg_len.max(1e-9);
                idf * f * (self.k1 + 1.0) / (f + self.k1 * norm)
            })
            .sum()
    }

    /// Passage indices with positive score, best first (ties by index).
    pub fn search(&self, query: &str) -> Vec<(usize, f64)> {
        let mut hits: Vec<(usize, f64)> =
            (0..self.passages.len()).map(|i| (i, self.score(query, i))).filter(|(_, s)| *s > 0.0).collect();
        hits.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        hits
    }

    pub fn passage(&self, i: usize) -> (&str, &str) {
        let (u, t) = &self.passages[i];
        (u, t)
    }
}

/// Reads every recorded document under `dir/<source slug>/`.
pub fn recorded_documents(dir: &Path, kind: SourceKind) -> std::io::Result<Vec<SearchResultDoc>> {
    let sub = dir.join(kind.slug());
    let mut files: Vec<PathBuf> = match std::fs::read_dir(&sub) {
        Ok(rd) => rd.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.extension().is_some_and(|x| x == "json")).collect(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(vec![]),
        Err(e) => return Err(e),
    };
    files.sort();
    let mut seen = HashSet::new();
    let mut docs = Vec::new();
    for f in files {
        let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&f)?)?;
        let batch: Vec<SearchResultDoc> = serde_json::from_value(v["docs"].clone())?;
        docs.extend(batch.into_iter().filter(|d| seen.insert(d.url.clone())));
    }
    Ok(docs)
}

/// Single-pass generation with the best BM25 passage from a static Stack
/// Overflow collection appended to the first-pass prompt.
pub struct RagBm25Adapter {
    backend: Arc<dyn GeneratorBackend>,
    index: Bm25Index,
    config: PipelineConfig,
}

impl RagBm25Adapter {
    pub fn new(backend: Arc<dyn GeneratorBackend>, docs: &[SearchResultDoc], config: PipelineConfig) -> Self {
        let passages = docs.iter().flat_map(|d| chunk_document(d).into_iter().map(|c| (d.url.clone(), c))).collect();
        RagBm25Adapter { backend, index: Bm25Index::new(passages), config }
    }

    /// The prompt sent for `ctx`, or `None` if the first-pass prompt cannot be rendered.
    pub fn prompt(&self, ctx: &ErrorContext, hc: &HypothesisConfig) -> Option<(String, Vec<String>)> {
        let base = render_hypothesis_prompt(ctx, hc.prompt_budget).ok()?;
        let query = format!("{} {}", ctx.language.query_word(), ctx.raw_message);
        let hits = self.index.search(&query);
        let mut seen = HashSet::new();
        let ranking: Vec<String> =
            hits.iter().map(|(i, _)| self.index.passage(*i).0.to_string()).filter(|u| seen.insert(u.clone())).collect();
        let rendered = match hits.first() {
            Some((i, _)) => {
                let (url, text) = self.index.passage(*i);
                format!("{}\nRelevant Stack Overflow passage ({url}):\n{text}\n", base.rendered)
            }
            None => base.rendered,
        };
        Some((rendered, ranking))
    }
}

impl SystemAdapter for RagBm25Adapter {
    fn identity(&self) -> String {
        "rag-bm25".into()
    }
    fn retrieves(&self) -> bool {
        true
    }
    fn repair(&self, inst: &BenchmarkInstance) -> AdapterOutput {
        let hc = &self.config.hypothesis;
        let Some((rendered, ranking)) = instance_context(inst, &self.config.extraction).ok().and_then(|ctx| self.prompt(&ctx, hc))
        else {
            return AdapterOutput::default();
        };
        let prompt = crate::hypothesis::HypothesisPrompt { token_estimate: 0, field_map: BTreeMap::new(), rendered };
        match generate_hypothesis(&prompt, self.backend.as_ref(), hc) {
            Ok(h) => AdapterOutput {
                solutions: vec![solution(h.fix, h.explanation, h.confidence, Provenance::HypothesisOnly)],
                evidence_ranking: ranking,
            },
            Err(e) => {
                log::warn!("{}: {e}", inst.id);
                AdapterOutput { solutions: vec![], evidence_ranking: ranking }
            }
        }
    }
}

/// The full pipeline.
pub struct WarpFullAdapter {
    pipeline: Pipeline,
}

impl WarpFullAdapter {
    pub fn new(pipeline: Pipeline) -> Self {
        WarpFullAdapter { pipeline }
    }
}

impl SystemAdapter for WarpFullAdapter {
    fn identity(&self) -> String {
        "warp-full".into()
    }
    fn retrieves(&self) -> bool {
        true
    }
    fn repair(&self, inst: &BenchmarkInstance) -> AdapterOutput {
        let ctx = match instance_context(inst, &self.pipeline.config().extraction) {
            Ok(c) => c,
            Err(e) => {
                log::warn!("{}: {e}", inst.id);
                return AdapterOutput::default();
            }
        };
        match self.pipeline.repair_context(ctx, &|_| {}) {
            RepairOutcome::Repaired(r) => {
                let mut seen = HashSet::new();
                let ranking = r.evidence.snippets.iter().map(|s| s.url.clone()).filter(|u| seen.insert(u.clone())).collect();
                AdapterOutput { solutions: r.solutions, evidence_ranking: ranking }
            }
            other => {
                log::warn!("{}: {other:?}", inst.id);
                AdapterOutput::default()
            }
        }
    }
}

pub const SYSTEM_NAMES: [&str; 6] = ["oracle", "null", "ide-std", "llm-core-only", "rag-bm25", "warp-full"];

/// Recorded generator and web fixtures for a benchmark.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkAssets {
    /// Holds `core/`, `synthesis/` and `rag/` replay files.
    pub replay_dir: PathBuf,
    /// Holds one directory of recorded responses per source.
    pub web_dir: PathBuf,
    /// Scoring "now" for evidence recency, Unix seconds.
    pub as_of: i64,
}

/// 2026-01-01T00:00:00Z.
pub const DEFAULT_AS_OF: i64 = 1_767_225_600;

impl BenchmarkAssets {
    /// The layout next to a dataset file: `replay/` and `web/`.
    pub fn beside(dataset: &Path) -> Self {
        let root = dataset.parent().unwrap_or(Path::new("."));
        BenchmarkAssets { replay_dir: root.join("replay"), web_dir: root.join("web"), as_of: DEFAULT_AS_OF }
    }

    fn replay(&self, role: &str) -> Result<Arc<dyn GeneratorBackend>, String> {
        let dir = self.replay_dir.join(role);
        let b = replay_from_dir(&dir, &format!("replay-{role}")).map_err(|e| format!("{}: {e}", dir.display()))?;
        Ok(Arc::new(b))
    }

    /// The full pipeline over these fixtures, with the given sources.
    pub fn pipeline(&self, config: PipelineConfig, sources: Sources) -> Result<Pipeline, String> {
        Ok(Pipeline::new(config, self.replay("core")?, self.replay("synthesis")?, sources).with_scoring_time(self.as_of))
    }
}

/// Builds the adapter registered under `name`.
pub fn make_adapter(name: &str, assets: &BenchmarkAssets, config: &PipelineConfig) -> Result<Box<dyn SystemAdapter>, String> {
    Ok(match name {
        "oracle" => Box::new(OracleAdapter),
        "null" => Box::new(NullAdapter),
        "ide-std" => Box::new(IdeStdAdapter),
        "llm-core-only" => Box::new(LlmCoreOnlyAdapter::new(assets.replay("core")?, config.clone())),
        "rag-bm25" => {
            let docs = recorded_documents(&assets.web_dir, SourceKind::StackOverflow).map_err(|e| e.to_string())?;
            Box::new(RagBm25Adapter::new(assets.replay("rag")?, &docs, config.clone()))
        }
        "warp-full" => Box::new(WarpFullAdapter::new(assets.pipeline(config.clone(), Sources::fixtures(&assets.web_dir))?)),
        other => return Err(format!("unknown system {other:?}; known: {}", SYSTEM_NAMES.join(", "))),
    })
}
