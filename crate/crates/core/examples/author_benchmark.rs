//! Regenerates `benchmark/mini/` from the case scripts in `benchmark/cases/`.
//!
//! Every broken file is compiled for real to record its error output, every
//! fix variant is checked in the sandbox, and the scripted generator answers
//! and authored web documents are recorded as replay fixtures. Needs gcc,
//! g++, python3 and go on PATH.
//!
//! ```text
//! cargo run -p warp-core --example author_benchmark
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, LazyLock, Mutex};
use std::time::Duration;

use regex::Regex;
use serde::Deserialize;
use warp_core::context::parse_project_metadata;
use warp_core::diagnostics::capture_command;
use warp_core::diff::render_diff;
use warp_core::eval::{
    check_code, instance_context, load_benchmark, make_adapter, normalize_url, recorded_documents, run_evaluation,
    write_benchmark, BenchmarkAssets, BenchmarkInstance, EvalConfig, RagBm25Adapter, SandboxSpec, SystemAdapter,
    UnitTestSpec, DEFAULT_AS_OF, SYSTEM_NAMES,
};
use warp_core::hypothesis::{BackendError, Completion, FnBackend, GeneratorBackend, RecordingBackend};
use warp_core::retrieval::{RecordingClient, SearchResultDoc, SourceClient, SourceError, SourceKind, Sources};
use warp_core::{LanguageId, Pipeline, PipelineConfig, RepairOutcome};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Case {
    language: String,
    file: String,
    reference_explanation: String,
    verified_urls: Vec<String>,
    unit_tests: Option<UnitTestSpec>,
    hypothesis: Answer,
    synthesis: Answer,
    rag: Answer,
    docs: Vec<Doc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Answer {
    /// `fixed` or the stem of an alternative file in the case directory.
    fix: String,
    explanation: String,
    confidence: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Doc {
    source: String,
    url: String,
    title: String,
    published: Option<String>,
    body: String,
    #[serde(default)]
    signals: BTreeMap<String, f64>,
}

struct Loaded {
    id: String,
    case: Case,
    variants: BTreeMap<String, String>,
    instance: BenchmarkInstance,
    docs: Vec<SearchResultDoc>,
}

impl Loaded {
    fn diff_for(&self, answer: &Answer) -> String {
        let stem = answer.fix.trim_end_matches(&format!(".{}", ext(&self.case.file)));
        let code = self.variants.get(stem).unwrap_or_else(|| panic!("{}: no variant {stem}", self.id));
        render_diff(&self.instance.erroneous_code, code, &self.case.file).to_string()
    }
}

fn ext(file: &str) -> &str {
    file.rsplit('.').next().unwrap_or("")
}

fn language(name: &str) -> LanguageId {
    match name {
        "c" => LanguageId::C,
        "cpp" => LanguageId::Cpp,
        "python" => LanguageId::Python,
        "go" => LanguageId::Go,
        other => panic!("unknown language {other}"),
    }
}

fn source_kind(name: &str) -> SourceKind {
    SourceKind::ALL.into_iter().find(|k| k.slug() == name).unwrap_or_else(|| panic!("unknown source {name}"))
}

fn unix_date(date: &str) -> i64 {
    let fmt = time::macros::format_description!("[year]-[month]-[day]");
    time::Date::parse(date, &fmt).expect("YYYY-MM-DD").midnight().assume_utc().unix_timestamp()
}

/// Compiles the broken file the way the instance records it and returns the
/// output with the scratch directory stripped from paths.
fn record_error(inst: &BenchmarkInstance, code: &str) -> String {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join(inst.file_name()), code).unwrap();
    let cap = capture_command(&inst.build_command(), dir.path(), Duration::from_secs(120)).expect("build runs");
    assert_ne!(cap.exit_code, 0, "{}: broken code builds", inst.id);
    let prefix = format!("{}/", dir.path().display());
    cap.stderr_text().replace(&prefix, "")
}

fn load_case(dir: &Path) -> Loaded {
    let id = dir.file_name().unwrap().to_string_lossy().into_owned();
    let case: Case = toml::from_str(&fs::read_to_string(dir.join("case.toml")).unwrap())
        .unwrap_or_else(|e| panic!("{id}/case.toml: {e}"));
    let suffix = format!(".{}", ext(&case.file));
    let mut variants = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if let Some(stem) = name.strip_suffix(&suffix) {
            variants.insert(stem.to_string(), fs::read_to_string(&path).unwrap());
        }
    }
    let lang = language(&case.language);
    let mut instance = BenchmarkInstance {
        id: id.clone(),
        language: lang,
        erroneous_code: variants["broken"].clone(),
        error_message: String::new(),
        project_context: Default::default(),
        ground_truth_diff: render_diff(&variants["broken"], &variants["fixed"], &case.file),
        reference_explanation: case.reference_explanation.trim().to_string(),
        verified_urls: case.verified_urls.clone(),
        unit_tests: case.unit_tests.clone(),
    };
    instance.error_message = record_error(&instance, &variants["broken"]);
    instance.project_context = parse_project_metadata(dir, lang, &instance.build_command());
    instance.validate().unwrap_or_else(|e| panic!("{id}: {e}"));
    let docs = case
        .docs
        .iter()
        .map(|d| SearchResultDoc {
            url: d.url.clone(),
            title: d.title.clone(),
            body: d.body.trim().to_string(),
            source: source_kind(&d.source),
            published_at: d.published.as_deref().map(unix_date),
            source_signals: d.signals.clone(),
        })
        .collect();
    Loaded { id, case, variants, instance, docs }
}

fn verify_variants(l: &Loaded, spec: &SandboxSpec) {
    let test = l.instance.unit_tests.as_ref();
    for (stem, code) in &l.variants {
        let v = check_code(code, &l.case.file, l.instance.language, test, spec).expect("sandbox works");
        let ok = v.compiled && v.semantically_correct != Some(false);
        match stem.as_str() {
            "broken" => assert!(!v.compiled, "{}: broken variant compiles", l.id),
            "fixed" => assert!(ok, "{}: fixed variant fails: {v:?}", l.id),
            _ => assert!(v.compiled, "{}: {stem} does not compile", l.id),
        }
        println!("  {stem:<10} {v:?}");
    }
}

fn completion(text: String) -> Result<Completion, BackendError> {
    Ok(Completion { text, ..Default::default() })
}

static OFFERED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^\[ev:([A-Za-z0-9_-]+)\] \([a-z]+, (\S+), score").unwrap());

/// The scripted synthesis answer: cites the offered evidence that comes from
/// a verified url, or the best-scored snippet when none does.
fn synthesis_answer(l: &Loaded, prompt: &str) -> String {
    let offered: Vec<(String, String)> = OFFERED.captures_iter(prompt).map(|c| (c[1].to_string(), c[2].to_string())).collect();
    let verified: Vec<String> = l.case.verified_urls.iter().map(|u| normalize_url(u)).collect();
    let mut cited: Vec<&str> = offered.iter().filter(|(_, u)| verified.contains(&normalize_url(u))).map(|(id, _)| id.as_str()).collect();
    if cited.is_empty() {
        cited.extend(offered.first().map(|(id, _)| id.as_str()));
    }
    cited.dedup();
    let markers = cited.iter().map(|id| format!("[ev:{id}]")).collect::<Vec<_>>().join(" ");
    let explanation = l.case.synthesis.explanation.replace("{cite}", &markers);
    let used = cited.iter().map(|id| format!("ev:{id}")).collect::<Vec<_>>().join(", ");
    format!(
        "{explanation}\n```diff\n{}```\nEvidence-Used: {used}\nConfidence: {}\n",
        l.diff_for(&l.case.synthesis),
        l.case.synthesis.confidence
    )
}

fn hypothesis_answer(l: &Loaded, answer: &Answer) -> String {
    format!("{}\n```diff\n{}```\nConfidence: {}\n", answer.explanation, l.diff_for(answer), answer.confidence)
}

/// Serves the current case's authored documents for its source kind.
struct AuthoredClient {
    kind: SourceKind,
    cases: Arc<Vec<Loaded>>,
    current: Arc<Mutex<usize>>,
    seen: Mutex<HashMap<String, usize>>,
}

impl SourceClient for AuthoredClient {
    fn kind(&self) -> SourceKind {
        self.kind
    }

    fn search(&self, query: &str, limit: usize) -> Result<Vec<SearchResultDoc>, SourceError> {
        let i = *self.current.lock().unwrap();
        if let Some(prev) = self.seen.lock().unwrap().insert(query.to_string(), i) {
            assert_eq!(prev, i, "{} query {query:?} shared by two cases", self.kind);
        }
        Ok(self.cases[i].docs.iter().filter(|d| d.source == self.kind).take(limit).cloned().collect())
    }
}

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("benchmark");
    let out = root.join("mini");
    if out.exists() {
        fs::remove_dir_all(&out).unwrap();
    }
    fs::create_dir_all(&out).unwrap();

    let mut dirs: Vec<PathBuf> = fs::read_dir(root.join("cases")).unwrap().map(|e| e.unwrap().path()).filter(|p| p.is_dir()).collect();
    dirs.sort();
    let spec = SandboxSpec::default();
    let cases: Vec<Loaded> = dirs
        .iter()
        .map(|d| {
            let l = load_case(d);
            println!("{}", l.id);
            verify_variants(&l, &spec);
            l
        })
        .collect();
    let dataset = out.join("dataset.jsonl");
    let instances: Vec<BenchmarkInstance> = cases.iter().map(|l| l.instance.clone()).collect();
    write_benchmark(&dataset, &instances).unwrap();

    let cases = Arc::new(cases);
    let current = Arc::new(Mutex::new(0usize));
    let config = PipelineConfig::default();

    let (c, k) = (cases.clone(), current.clone());
    let core = Arc::new(RecordingBackend::new(FnBackend::new("scripted-core", move |_: &str| {
        let l = &c[*k.lock().unwrap()];
        completion(hypothesis_answer(l, &l.case.hypothesis))
    })));
    let (c, k) = (cases.clone(), current.clone());
    let synth = Arc::new(RecordingBackend::new(FnBackend::new("scripted-synthesis", move |prompt: &str| {
        completion(synthesis_answer(&c[*k.lock().unwrap()], prompt))
    })));
    let web = out.join("web");
    let sources = SourceKind::ALL.into_iter().fold(Sources::new(), |s, kind| {
        let client = AuthoredClient { kind, cases: cases.clone(), current: current.clone(), seen: Mutex::default() };
        s.with(RecordingClient::new(client, &web.join(kind.slug())))
    });
    let pipeline = Pipeline::new(config.clone(), core.clone(), synth.clone(), sources).with_scoring_time(DEFAULT_AS_OF);
    for (i, l) in cases.iter().enumerate() {
        *current.lock().unwrap() = i;
        let ctx = instance_context(&l.instance, &config.extraction).unwrap();
        match pipeline.repair_context(ctx, &|_| {}) {
            RepairOutcome::Repaired(r) => println!("{}: {} evidence, {} solutions", l.id, r.evidence.snippets.len(), r.solutions.len()),
            other => panic!("{}: {other:?}", l.id),
        }
    }
    let replay = out.join("replay");
    fs::create_dir_all(replay.join("core")).unwrap();
    core.save(&replay.join("core").join("replay.json")).unwrap();
    fs::create_dir_all(replay.join("synthesis")).unwrap();
    synth.save(&replay.join("synthesis").join("replay.json")).unwrap();

    let (c, k) = (cases.clone(), current.clone());
    let rag = Arc::new(RecordingBackend::new(FnBackend::new("scripted-rag", move |_: &str| {
        let l = &c[*k.lock().unwrap()];
        completion(hypothesis_answer(l, &l.case.rag))
    })));
    let so_docs = recorded_documents(&web, SourceKind::StackOverflow).unwrap();
    let rag_adapter = RagBm25Adapter::new(rag.clone() as Arc<dyn GeneratorBackend>, &so_docs, config.clone());
    for (i, l) in cases.iter().enumerate() {
        *current.lock().unwrap() = i;
        assert!(!rag_adapter.repair(&l.instance).solutions.is_empty(), "{}: rag produced nothing", l.id);
    }
    fs::create_dir_all(replay.join("rag")).unwrap();
    rag.save(&replay.join("rag").join("replay.json")).unwrap();

    let bench = load_benchmark(&dataset).unwrap();
    assert!(bench.errors.is_empty(), "{:?}", bench.errors);
    let assets = BenchmarkAssets::beside(&dataset);
    let adapters: Vec<Box<dyn SystemAdapter>> = SYSTEM_NAMES.iter().map(|n| make_adapter(n, &assets, &config).unwrap()).collect();
    let report = run_evaluation(&adapters, &bench.instances, &bench.hash, &EvalConfig::default());
    report.write(&out.join("golden_report.txt")).unwrap();
    println!("{}", report.render_text());
}
