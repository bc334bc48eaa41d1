use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{LazyLock, Mutex};
use std::time::Instant;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::metrics::{bleu4, mrr, ndcg_at_3, rouge_l, ROUGE_BETA};
use super::sandbox::{compiles_correctly, SandboxSpec, Verdict};
use super::{BenchmarkInstance, SystemAdapter};
use crate::diff::{apply_diff, diffs_equivalent};
use crate::util::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Instances evaluated concurrently per system.
    pub parallelism: usize,
    pub sandbox: SandboxSpec,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
        EvalConfig { parallelism: cores.min(8), sandbox: SandboxSpec::default() }
    }
}

/// Metric variants, recorded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSettings {
    pub bleu: String,
    pub rouge_l_beta: f64,
    pub ndcg_gain: String,
    pub latency_rounding_s: f64,
    pub citation_markers_stripped: bool,
}

impl Default for MetricSettings {
    fn default() -> Self {
        MetricSettings {
            bleu: "sentence BLEU-4, case-folded whitespace tokens, add-one smoothing for n>=2".into(),
            rouge_l_beta: ROUGE_BETA,
            ndcg_gain: "binary, urls normalized (scheme, fragment, trailing slash)".into(),
            latency_rounding_s: 0.1,
            citation_markers_stripped: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub instance: String,
    pub exact_match: bool,
    pub compiled: bool,
    pub semantically_correct: Option<bool>,
    pub bleu4: f64,
    pub rouge_l: f64,
    pub ndcg_at_3: f64,
    pub first_correct_rank: Option<u32>,
    pub solutions: usize,
    pub sandbox_error: Option<String>,
    #[serde(skip)]
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemRow {
    pub system: String,
    pub exact_match_pct: f64,
    pub compiles_correctly_pct: f64,
    /// Among compiled top-1 fixes of instances with unit tests; `None` when
    /// no such fix exists.
    pub semantic_correctness_pct: Option<f64>,
    pub bleu4: Option<f64>,
    pub rouge_l: Option<f64>,
    pub ndcg_at_3: Option<f64>,
    pub mrr: f64,
    pub mean_latency_s: f64,
    pub sandbox_failures: usize,
    pub results: Vec<InstanceResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset_hash: String,
    pub instances: usize,
    pub metrics: MetricSettings,
    pub sandbox: SandboxSpec,
    pub rows: Vec<SystemRow>,
}

static MARKER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s*\[ev:[A-Za-z0-9_-]+\]").unwrap());

fn plain(explanation: &str) -> String {
    MARKER.replace_all(explanation, "").into_owned()
}

fn pct(count: usize, of: usize) -> f64 {
    if of == 0 { 0.0 } else { 100.0 * count as f64 / of as f64 }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 { 0.0 } else { s / n as f64 }
}

type VerdictCache = Mutex<HashMap<(String, String), Result<Verdict, String>>>;

fn evaluate_one(
    adapter: &dyn SystemAdapter,
    inst: &BenchmarkInstance,
    sandbox: &SandboxSpec,
    verdicts: &VerdictCache,
) -> InstanceResult {
    let start = Instant::now();
    let out = adapter.repair(inst);
    let latency_ms = start.elapsed().as_millis() as u64;

    let top = out.solutions.first();
    let exact_match = top.is_some_and(|s| diffs_equivalent(&s.fix, &inst.ground_truth_diff, &inst.erroneous_code));
    let first_correct_rank = out
        .solutions
        .iter()
        .position(|s| diffs_equivalent(&s.fix, &inst.ground_truth_diff, &inst.erroneous_code))
        .map(|i| i as u32 + 1);
    let (verdict, sandbox_error) = match top {
        None => (Verdict { compiled: false, semantically_correct: inst.unit_tests.as_ref().map(|_| false) }, None),
        Some(s) => {
            let patched = apply_diff(&inst.erroneous_code, &s.fix).unwrap_or_default();
            let key = (inst.id.clone(), sha256_hex(patched.as_bytes()));
            let cached = verdicts.lock().unwrap().get(&key).cloned();
            let result = cached.unwrap_or_else(|| {
                let r = compiles_correctly(inst, s, sandbox).map_err(|e| e.to_string());
                verdicts.lock().unwrap().insert(key, r.clone());
                r
            });
            match result {
                Ok(v) => (v, None),
                Err(e) => (Verdict { compiled: false, semantically_correct: None }, Some(e)),
            }
        }
    };
    let explanation = top.map(|s| plain(&s.explanation)).unwrap_or_default();
    InstanceResult {
        instance: inst.id.clone(),
        exact_match,
        compiled: verdict.compiled,
        semantically_correct: verdict.semantically_correct,
        bleu4: bleu4(&explanation, &inst.reference_explanation),
        rouge_l: rouge_l(&explanation, &inst.reference_explanation),
        ndcg_at_3: ndcg_at_3(&out.evidence_ranking, &inst.verified_urls),
        first_correct_rank,
        solutions: out.solutions.len(),
        sandbox_error,
        latency_ms,
    }
}

fn summarize(adapter: &dyn SystemAdapter, results: Vec<InstanceResult>) -> SystemRow {
    let n = results.len();
    let correct = results.iter().filter(|r| r.compiled && r.semantically_correct != Some(false)).count();
    let tested: Vec<&InstanceResult> = results.iter().filter(|r| r.compiled && r.semantically_correct.is_some()).collect();
    let latency_s = mean(results.iter().map(|r| r.latency_ms as f64)) / 1000.0;
    SystemRow {
        system: adapter.identity(),
        exact_match_pct: pct(results.iter().filter(|r| r.exact_match).count(), n),
        compiles_correctly_pct: pct(correct, n),
        semantic_correctness_pct: (!tested.is_empty())
            .then(|| pct(tested.iter().filter(|r| r.semantically_correct == Some(true)).count(), tested.len())),
        bleu4: adapter.explains().then(|| mean(results.iter().map(|r| r.bleu4))),
        rouge_l: adapter.explains().then(|| mean(results.iter().map(|r| r.rouge_l))),
        ndcg_at_3: adapter.retrieves().then(|| mean(results.iter().map(|r| r.ndcg_at_3))),
        mrr: mrr(&results.iter().map(|r| r.first_correct_rank).collect::<Vec<_>>()),
        mean_latency_s: (latency_s * 10.0).round() / 10.0,
        sandbox_failures: results.iter().filter(|r| r.sandbox_error.is_some()).count(),
        results,
    }
}

/// Runs every adapter over every instance. Latency is measured around each
/// adapter call; sandbox failures are recorded per instance.
pub fn run_evaluation(
    adapters: &[Box<dyn SystemAdapter>],
    instances: &[BenchmarkInstance],
    dataset_hash: &str,
    config: &EvalConfig,
) -> EvalReport {
    let verdicts: VerdictCache = Mutex::default();
    let workers = config.parallelism.max(1).min(instances.len().max(1));
    let rows = adapters
        .iter()
        .map(|adapter| {
            let next = AtomicUsize::new(0);
            let slots: Vec<Mutex<Option<InstanceResult>>> = instances.iter().map(|_| Mutex::new(None)).collect();
            std::thread::scope(|s| {
                for _ in 0..workers {
                    s.spawn(|| loop {
                        let i = next.fetch_add(1, Ordering::SeqCst);
                        let Some(inst) = instances.get(i) else { break };
                        let r = evaluate_one(adapter.as_ref(), inst, &config.sandbox, &verdicts);
                        *slots[i].lock().unwrap() = Some(r);
                    });
                }
            });
            let results = slots.into_iter().map(|m| m.into_inner().unwrap().expect("every instance evaluated")).collect();
            summarize(adapter.as_ref(), results)
        })
        .collect();
    EvalReport {
        dataset_hash: dataset_hash.to_string(),
        instances: instances.len(),
        metrics: MetricSettings::default(),
        sandbox: config.sandbox.clone(),
        rows,
    }
}

fn opt(v: Option<f64>, decimals: usize) -> String {
    v.map_or("N/A".into(), |x| format!("{x:.decimals$}"))
}

impl EvalReport {
    /// Column-aligned table, one row per system.
    pub fn render_text(&self) -> String {
        let header = ["System", "ExactMatch", "Compiles", "SC", "BLEU-4", "ROUGE-L", "NDCG@3", "MRR", "Latency(s)"];
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.system.clone(),
                    format!("{:.1}", r.exact_match_pct),
                    format!("{:.1}", r.compiles_correctly_pct),
                    opt(r.semantic_correctness_pct, 0),
                    opt(r.bleu4, 3),
                    opt(r.rouge_l, 3),
                    opt(r.ndcg_at_3, 3),
                    format!("{:.3}", r.mrr),
                    format!("{:.1}", r.mean_latency_s),
                ]
            })
            .collect();
        let widths: Vec<usize> =
            (0..header.len()).map(|c| cells.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap()).collect();
        let mut out = String::new();
        writeln!(out, "dataset {} ({} instances)", &self.dataset_hash[..self.dataset_hash.len().min(16)], self.instances).unwrap();
        let line = |out: &mut String, row: &[String]| {
            let mut s = format!("{:<w$}", row[0], w = widths[0]);
            for (c, cell) in row.iter().enumerate().skip(1) {
                write!(s, "  {:>w$}", cell, w = widths[c]).unwrap();
            }
            writeln!(out, "{}", s.trim_end()).unwrap();
        };
        line(&mut out, &header.map(String::from));
        writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1))).unwrap();
        for row in &cells {
            line(&mut out, row);
        }
        let failures: usize = self.rows.iter().map(|r| r.sandbox_failures).sum();
        if failures > 0 {
            writeln!(out, "sandbox failures: {failures}").unwrap();
        }
        writeln!(out, "SC: unit-test pass rate among compiled fixes; N/A: no tested fix, or the system does not explain/retrieve.").unwrap();
        writeln!(out, "BLEU: {}; ROUGE-L beta {}; NDCG gain: {}.", self.metrics.bleu, self.metrics.rouge_l_beta, self.metrics.ndcg_gain)
            .unwrap();
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn row(&self, system: &str) -> Option<&SystemRow> {
        self.rows.iter().find(|r| r.system == system)
    }

    /// Writes the table to `path` and the structured report next to it with a
    /// `.json` extension (or the reverse when `path` already ends in `.json`).
    pub fn write(&self, path: &Path) -> std::io::Result<(PathBuf, PathBuf)> {
        let (text, json) = if path.extension().is_some_and(|e| e == "json") {
            (path.with_extension("txt"), path.to_path_buf())
        } else {
            (path.to_path_buf(), path.with_extension("json"))
        };
        if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&text, self.render_text())?;
        std::fs::write(&json, self.to_json())?;
        Ok((text, json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::LanguageId;
    use crate::diff::parse_unified_diff;
    use crate::eval::{NullAdapter, OracleAdapter, UnitTestSpec};

    fn inst() -> BenchmarkInstance {
        BenchmarkInstance {
            id: "c-1".into(),
            language: LanguageId::C,
            erroneous_code: "#include <stdio.h>\nint main(void)\n{\n    printf(\"ok\\n\");\n    return 0\n}\n".into(),
            error_message: "main.c: In function 'main':\nmain.c:5:13: error: expected ';' before '}' token\n".into(),
            project_context: Default::default(),
            ground_truth_diff: parse_unified_diff("--- a/main.c\n+++ b/main.c\n@@ -5 +5 @@\n-    return 0\n+    return 0;\n").unwrap(),
            reference_explanation: "The return statement is missing its terminating semicolon.".into(),
            verified_urls: vec!["https://en.cppreference.com/w/c/language/statements".into()],
            unit_tests: Some(UnitTestSpec { stdin: String::new(), expected_stdout: "ok".into() }),
        }
    }

    #[test]
    fn bounds_and_rendering() {
        let adapters: Vec<Box<dyn SystemAdapter>> = vec![Box::new(OracleAdapter), Box::new(NullAdapter)];
        let report = run_evaluation(&adapters, &[inst()], "abc", &EvalConfig::default());
        let oracle = report.row("oracle").unwrap();
        assert_eq!((oracle.exact_match_pct, oracle.compiles_correctly_pct), (100.0, 100.0));
        assert_eq!(oracle.semantic_correctness_pct, Some(100.0));
        assert_eq!((oracle.bleu4, oracle.ndcg_at_3, oracle.mrr), (Some(1.0), Some(1.0), 1.0));
        let null = report.row("null").unwrap();
        assert_eq!((null.exact_match_pct, null.compiles_correctly_pct, null.mrr), (0.0, 0.0, 0.0));
        assert_eq!(null.semantic_correctness_pct, None);
        let text = report.render_text();
        assert!(text.lines().nth(1).unwrap().starts_with("System "));
        assert!(text.contains("oracle"));
        let back: EvalReport = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(back.rows.len(), 2);
    }

    #[test]
    fn markers_are_stripped_before_scoring() {
        assert_eq!(plain("Add a semicolon [ev:ab12cd34]. Done [ev:x]."), "Add a semicolon. Done.");
    }
}
