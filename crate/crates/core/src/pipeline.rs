//! End-to-end orchestration of one repair: ingest, context, hypothesis and
//! retrieval in parallel, synthesis and ranking.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cache::{CachedClient, SearchCache};
use crate::context::{build_error_context, ErrorContext, ExtractionConfig};
use crate::diagnostics::{detect_error_signature, RawCapture};
use crate::hypothesis::{generate_hypothesis, render_hypothesis_prompt, GeneratorBackend, Hypothesis, HypothesisConfig};
use crate::retrieval::{
    build_evidence, fetch_all, formulate_queries, EvidenceSet, RetrievalConfig, SearchQuery, SearchResultDoc,
    SourceError, Sources,
};
use crate::synthesis::{hypothesis_only, rank_solutions, render_synthesis_prompt, synthesize, FinalSolution, SynthesisConfig};
use crate::util::sha256_hex;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub extraction: ExtractionConfig,
    pub hypothesis: HypothesisConfig,
    pub retrieval: RetrievalConfig,
    pub synthesis: SynthesisConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Context,
    Hypothesis,
    Queries,
    Retrieval,
    Evidence,
    Synthesis,
    Ranking,
}

impl Stage {
    /// Stages that involve no network or generator call.
    pub const DETERMINISTIC: [Stage; 4] = [Stage::Ingest, Stage::Context, Stage::Queries, Stage::Evidence];
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).unwrap();
        f.write_str(s.as_str().unwrap())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Done,
    Degraded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageEvent {
    pub stage: Stage,
    pub status: StageStatus,
    pub detail: String,
    pub elapsed_us: u64,
}

/// Wall time per stage in microseconds, summed over repeated invocations.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTimings(pub BTreeMap<Stage, u64>);

impl StageTimings {
    fn add(&mut self, stage: Stage, us: u64) {
        *self.0.entry(stage).or_default() += us;
    }

    pub fn get(&self, stage: Stage) -> u64 {
        self.0.get(&stage).copied().unwrap_or(0)
    }

    pub fn deterministic_us(&self) -> u64 {
        Stage::DETERMINISTIC.iter().map(|s| self.get(*s)).sum()
    }

    pub fn total_us(&self) -> u64 {
        self.0.values().sum()
    }
}

/// The file a repair targets, as read at capture time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSnapshot {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Repair {
    pub context: ErrorContext,
    pub source: Option<SourceSnapshot>,
    pub hypothesis: Hypothesis,
    pub queries: Vec<SearchQuery>,
    pub evidence: EvidenceSet,
    /// Ranked, never empty.
    pub solutions: Vec<FinalSolution>,
    pub source_errors: Vec<SourceError>,
    pub timings: StageTimings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RepairOutcome {
    /// The capture does not match the error signature.
    NoError { timings: StageTimings },
    Repaired(Box<Repair>),
    /// No solution could be produced; `reason` explains which stage gave up.
    Failed { stage: Stage, reason: String, context: Option<Box<ErrorContext>>, timings: StageTimings },
}

impl RepairOutcome {
    pub fn solutions(&self) -> &[FinalSolution] {
        match self {
            RepairOutcome::Repaired(r) => &r.solutions,
            _ => &[],
        }
    }

    pub fn timings(&self) -> &StageTimings {
        match self {
            RepairOutcome::NoError { timings } | RepairOutcome::Failed { timings, .. } => timings,
            RepairOutcome::Repaired(r) => &r.timings,
        }
    }
}

pub type Observer<'a> = &'a (dyn Fn(&StageEvent) + Sync);

pub struct Pipeline {
    config: PipelineConfig,
    hypothesis_backend: Arc<dyn GeneratorBackend>,
    synthesis_backend: Arc<dyn GeneratorBackend>,
    sources: Sources,
    scoring_time: Option<i64>,
}

struct Clock<'a> {
    observer: Observer<'a>,
    timings: std::sync::Mutex<StageTimings>,
}

impl Clock<'_> {
    fn time<T>(&self, stage: Stage, f: impl FnOnce() -> T, status: impl FnOnce(&T) -> (StageStatus, String)) -> T {
        let start = Instant::now();
        let out = f();
        let elapsed_us = start.elapsed().as_micros() as u64;
        self.timings.lock().unwrap().add(stage, elapsed_us);
        let (status, detail) = status(&out);
        (self.observer)(&StageEvent { stage, status, detail, elapsed_us });
        out
    }

    fn take(&self) -> StageTimings {
        std::mem::take(&mut self.timings.lock().unwrap())
    }
}

fn done<T>(_: &T) -> (StageStatus, String) {
    (StageStatus::Done, String::new())
}

impl Pipeline {
    pub fn new(
        config: PipelineConfig,
        hypothesis_backend: Arc<dyn GeneratorBackend>,
        synthesis_backend: Arc<dyn GeneratorBackend>,
        sources: Sources,
    ) -> Self {
        Pipeline { config, hypothesis_backend, synthesis_backend, sources, scoring_time: None }
    }

    /// Routes every source through `cache`.
    pub fn with_cache(mut self, cache: Arc<SearchCache>) -> Self {
        let mut wrapped = Sources::new();
        for kind in self.sources.kinds() {
            let inner = self.sources.get(kind).unwrap().clone();
            wrapped = wrapped.with(CachedClient::new(inner, cache.clone()));
        }
        self.sources = wrapped;
        self
    }

    /// Fixes the "now" used for evidence recency (Unix seconds).
    pub fn with_scoring_time(mut self, now: i64) -> Self {
        self.scoring_time = Some(now);
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// Repairs the first error in `capture`, reading the failing file and
    /// project manifests relative to the capture's working directory.
    pub fn repair(&self, capture: &RawCapture, observer: Observer<'_>) -> RepairOutcome {
        let clock = Clock { observer, timings: Default::default() };
        let signature = clock.time(Stage::Ingest, || detect_error_signature(capture), |s| match s {
            Some((parsed, first)) => (StageStatus::Done, parsed.diagnostics[*first].message.clone()),
            None => (StageStatus::Done, "no error signature".into()),
        });
        let Some((parsed, first)) = signature else {
            return RepairOutcome::NoError { timings: clock.take() };
        };
        let diag = &parsed.diagnostics[first];
        let path = capture.working_dir.join(&diag.file_path);
        let built = clock.time(
            Stage::Context,
            || {
                let source = std::fs::read_to_string(&path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                let ctx = build_error_context(capture, diag, &source, &capture.working_dir, &self.config.extraction)
                    .map_err(|e| e.to_string())?;
                Ok::<_, String>((ctx, sha256_hex(source.as_bytes())))
            },
            |r| match r {
                Ok((ctx, _)) if ctx.ast_window.degraded => (StageStatus::Degraded, "line window only".into()),
                Ok(_) => (StageStatus::Done, String::new()),
                Err(e) => (StageStatus::Failed, e.clone()),
            },
        );
        match built {
            Ok((ctx, sha256)) => {
                let now = self.scoring_time.unwrap_or((capture.finished_at / 1000) as i64);
                self.run(ctx, Some(SourceSnapshot { path, sha256 }), now, &clock)
            }
            Err(reason) => RepairOutcome::Failed { stage: Stage::Context, reason, context: None, timings: clock.take() },
        }
    }

    /// Runs the stages after context extraction on a prepared context.
    pub fn repair_context(&self, ctx: ErrorContext, observer: Observer<'_>) -> RepairOutcome {
        let clock = Clock { observer, timings: Default::default() };
        let now = self.scoring_time.unwrap_or_else(|| (crate::util::now_ms() / 1000) as i64);
        self.run(ctx, None, now, &clock)
    }

    fn run(&self, ctx: ErrorContext, source: Option<SourceSnapshot>, now: i64, clock: &Clock<'_>) -> RepairOutcome {
        let rc = &self.config.retrieval;
        let early = clock.time(Stage::Queries, || formulate_queries(&ctx, None, rc), done);
        let (hypothesis, early_outcomes) = std::thread::scope(|s| {
            let fetch = s.spawn(|| fetch_all(&early, &self.sources, rc));
            let hypothesis = clock.time(
                Stage::Hypothesis,
                || {
                    let prompt = render_hypothesis_prompt(&ctx, self.config.hypothesis.prompt_budget)?;
                    generate_hypothesis(&prompt, self.hypothesis_backend.as_ref(), &self.config.hypothesis)
                },
                |r| match r {
                    Ok(h) => (StageStatus::Done, format!("confidence {:.2}", h.confidence)),
                    Err(e) => (StageStatus::Failed, e.to_string()),
                },
            );
            (hypothesis, fetch.join().expect("retrieval thread panicked"))
        });
        let hypothesis = match hypothesis {
            Ok(h) => h,
            Err(e) => {
                return RepairOutcome::Failed {
                    stage: Stage::Hypothesis,
                    reason: e.to_string(),
                    context: Some(Box::new(ctx)),
                    timings: clock.take(),
                }
            }
        };

        let late: Vec<SearchQuery> = clock.time(
            Stage::Queries,
            || {
                formulate_queries(&ctx, Some(&hypothesis), rc)
                    .into_iter()
                    .filter(|q| !early.iter().any(|e| e.text == q.text))
                    .collect()
            },
            done,
        );
        let late_outcomes = clock.time(Stage::Retrieval, || fetch_all(&late, &self.sources, rc), |o| {
            let failed = o.iter().filter(|x| x.error.is_some()).count();
            (if failed > 0 { StageStatus::Degraded } else { StageStatus::Done }, format!("{failed} source errors"))
        });
        let mut docs: Vec<SearchResultDoc> = Vec::new();
        let mut source_errors = Vec::new();
        for o in early_outcomes.into_iter().chain(late_outcomes) {
            docs.extend(o.docs);
            source_errors.extend(o.error);
        }
        let evidence = clock.time(Stage::Evidence, || build_evidence(&ctx, &docs, rc, now), |e| {
            (StageStatus::Done, format!("{} snippets", e.snippets.len()))
        });

        let sc = &self.config.synthesis;
        let fallback = hypothesis_only(&hypothesis, sc);
        let synthesized = clock.time(
            Stage::Synthesis,
            || {
                if evidence.is_empty() {
                    return Err("no web evidence".to_string());
                }
                let prompt = render_synthesis_prompt(&ctx, &hypothesis, &evidence, sc.prompt_budget).map_err(|e| e.to_string())?;
                synthesize(&prompt, &hypothesis, &evidence, self.synthesis_backend.as_ref(), sc).map_err(|e| e.to_string())
            },
            |r| match r {
                Ok(s) if s.provenance == crate::synthesis::Provenance::Synthesized => (StageStatus::Done, String::new()),
                Ok(_) => (StageStatus::Degraded, "malformed synthesis answer".into()),
                Err(e) => (StageStatus::Degraded, e.clone()),
            },
        );
        let solutions = clock.time(
            Stage::Ranking,
            || {
                let mut all = vec![];
                if let Ok(s) = synthesized {
                    all.push(s);
                }
                if all.iter().all(|s| s.fix != fallback.fix) {
                    all.push(fallback);
                }
                rank_solutions(all)
            },
            |s: &Vec<FinalSolution>| (StageStatus::Done, format!("{} solutions", s.len())),
        );
        RepairOutcome::Repaired(Box::new(Repair {
            context: ctx,
            source,
            queries: early.into_iter().chain(late).collect(),
            hypothesis,
            evidence,
            solutions,
            source_errors,
            timings: clock.take(),
        }))
    }
}
