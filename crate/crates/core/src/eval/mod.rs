//! Benchmark loading, sandboxed fix checking, metrics and reports.

mod adapters;
mod dataset;
pub mod metrics;
mod report;
pub mod sandbox;

pub use adapters::{
    instance_context, make_adapter, recorded_documents, AdapterOutput, BenchmarkAssets, Bm25Index, IdeStdAdapter,
    LlmCoreOnlyAdapter, NullAdapter, OracleAdapter, RagBm25Adapter, SystemAdapter, WarpFullAdapter, DEFAULT_AS_OF,
    SYSTEM_NAMES,
};
pub use dataset::{
    load_benchmark, write_benchmark, Benchmark, BenchmarkInstance, DatasetError, UnitTestSpec, ValidationError,
    MAX_VERIFIED_URLS,
};
pub use metrics::{bleu4, mrr, ndcg_at_3, normalize_url, rouge_l};
pub use report::{run_evaluation, EvalConfig, EvalReport, InstanceResult, MetricSettings, SystemRow};
pub use sandbox::{check_code, compiles_correctly, SandboxFailure, SandboxSpec, Verdict};
