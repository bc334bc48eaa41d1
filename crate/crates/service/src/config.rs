//! The `warp` configuration file (TOML).
//!
//! Unknown keys are errors. Credentials are never read from the file: the
//! Stack Overflow, GitHub and generator keys come from `WARP_SO_KEY`,
//! `WARP_GH_KEY` and `WARP_LLM_KEY`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use warp_core::cache::{SearchCache, DEFAULT_TTL_MS};
use warp_core::eval::{EvalConfig, SandboxSpec};
use warp_core::hypothesis::{replay_from_dir, GeneratorBackend, HttpBackend, HttpBackendConfig};
use warp_core::retrieval::{GitHubIssuesClient, HttpSourceConfig, SourceKind, Sources, StackExchangeClient, WebSearchClient};
use warp_core::{Pipeline, PipelineConfig};

pub const SO_KEY_ENV: &str = "WARP_SO_KEY";
pub const GH_KEY_ENV: &str = "WARP_GH_KEY";
pub const LLM_KEY_ENV: &str = "WARP_LLM_KEY";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Unreadable { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Invalid(String),
    #[error("`{key}` looks like a credential; set WARP_SO_KEY, WARP_GH_KEY or WARP_LLM_KEY in the environment instead")]
    CredentialInFile { key: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServerConfig {
    pub bind: String,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig { bind: "127.0.0.1:7878".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StoreConfig {
    /// Defaults to `$XDG_DATA_HOME/warp/sessions.jsonl`.
    pub path: Option<PathBuf>,
    pub compact_every: usize,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig { path: None, compact_every: crate::store::DEFAULT_COMPACT_EVERY }
    }
}

impl StoreConfig {
    pub fn resolved_path(&self) -> PathBuf {
        self.path.clone().unwrap_or_else(|| data_dir().join("warp").join("sessions.jsonl"))
    }
}

fn data_dir() -> PathBuf {
    std::env::var_os("XDG_DATA_HOME")
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".local/share")))
        .unwrap_or_else(std::env::temp_dir)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CacheConfig {
    pub enabled: bool,
    /// Defaults to `$XDG_CACHE_HOME/warp/search-cache.jsonl`.
    pub path: Option<PathBuf>,
    pub ttl_hours: f64,
}

impl Default for CacheConfig {
    fn default() -> Self {
        CacheConfig { enabled: true, path: None, ttl_hours: DEFAULT_TTL_MS as f64 / 3_600_000.0 }
    }
}

/// Where generations come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendChoice {
    /// An OpenAI-compatible chat completions endpoint.
    Http {
        url: String,
        model: String,
        #[serde(default = "default_backend_timeout")]
        timeout_secs: u64,
        #[serde(default)]
        request_logprobs: bool,
    },
    /// Recorded completions (`*.json` files in `dir`).
    Replay { dir: PathBuf },
}

fn default_backend_timeout() -> u64 {
    60
}

impl Default for BackendChoice {
    fn default() -> Self {
        BackendChoice::Http {
            url: "http://127.0.0.1:8080/v1/chat/completions".into(),
            model: "warp-core".into(),
            timeout_secs: default_backend_timeout(),
            request_logprobs: false,
        }
    }
}

impl BackendChoice {
    pub fn build(&self, role: &str) -> Result<Arc<dyn GeneratorBackend>, ConfigError> {
        Ok(match self {
            BackendChoice::Http { url, model, timeout_secs, request_logprobs } => Arc::new(HttpBackend::new(HttpBackendConfig {
                url: url.clone(),
                model: model.clone(),
                api_key_env: LLM_KEY_ENV.into(),
                timeout_secs: *timeout_secs,
                request_logprobs: *request_logprobs,
            })),
            BackendChoice::Replay { dir } => Arc::new(
                replay_from_dir(dir, &format!("replay-{role}"))
                    .map_err(|e| ConfigError::Invalid(format!("replay dir {}: {e}", dir.display())))?,
            ),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub hypothesis: BackendChoice,
    /// Defaults to the hypothesis backend.
    pub synthesis: Option<BackendChoice>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Endpoint {
    pub base_url: String,
    #[serde(default = "default_source_timeout")]
    pub timeout_ms: u64,
}

fn default_source_timeout() -> u64 {
    2000
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourcesConfig {
    /// Recorded responses (`<dir>/<source>/`); when set, the endpoints are unused.
    pub fixtures: Option<PathBuf>,
    pub stackoverflow: Option<Endpoint>,
    pub github: Option<Endpoint>,
    /// A SearXNG-style JSON search endpoint; no public default.
    pub web: Option<Endpoint>,
}

impl Default for SourcesConfig {
    fn default() -> Self {
        SourcesConfig {
            fixtures: None,
            stackoverflow: Some(Endpoint { base_url: "https://api.stackexchange.com/2.3".into(), timeout_ms: default_source_timeout() }),
            github: Some(Endpoint { base_url: "https://api.github.com".into(), timeout_ms: default_source_timeout() }),
            web: None,
        }
    }
}

impl SourcesConfig {
    pub fn build(&self) -> Sources {
        if let Some(dir) = &self.fixtures {
            return Sources::fixtures(dir);
        }
        let http = |e: &Endpoint, key: Option<&str>| HttpSourceConfig {
            base_url: e.base_url.clone(),
            api_key_env: key.map(String::from),
            timeout_ms: e.timeout_ms,
        };
        let mut sources = Sources::new();
        if let Some(e) = &self.stackoverflow {
            sources = sources.with(StackExchangeClient::new(http(e, Some(SO_KEY_ENV))));
        }
        if let Some(e) = &self.github {
            sources = sources.with(GitHubIssuesClient::new(http(e, Some(GH_KEY_ENV))));
        }
        if let Some(e) = &self.web {
            sources = sources.with(WebSearchClient::new(http(e, None)));
        }
        sources
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BuildConfig {
    pub timeout_secs: u64,
    pub debounce_ms: u64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig { timeout_secs: 300, debounce_ms: 300 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WatchTarget {
    pub command: String,
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSettings {
    /// Defaults to the number of cores, at most 8.
    pub parallelism: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub server: ServerConfig,
    pub store: StoreConfig,
    pub cache: CacheConfig,
    pub generator: GeneratorConfig,
    pub sources: SourcesConfig,
    pub pipeline: PipelineConfig,
    pub sandbox: SandboxSpec,
    pub eval: EvalSettings,
    pub build: BuildConfig,
    /// Projects `warp serve` watches from startup.
    pub watch: Vec<WatchTarget>,
}

fn looks_like_credential(key: &str) -> bool {
    let k = key.to_ascii_lowercase().replace(['-', '_'], "");
    ["apikey", "token", "secret", "password", "credential"].iter().any(|w| k.contains(w)) || k == "key"
}

fn find_credential(v: &toml::Value, prefix: &str) -> Option<String> {
    match v {
        toml::Value::Table(t) => t.iter().find_map(|(k, v)| {
            let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            if looks_like_credential(k) { Some(path) } else { find_credential(v, &path) }
        }),
        toml::Value::Array(items) => items.iter().find_map(|v| find_credential(v, prefix)),
        _ => None,
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Config, ConfigError> {
        let raw: toml::Value = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Some(key) = find_credential(&raw, "") {
            return Err(ConfigError::CredentialInFile { key });
        }
        let config: Config = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Unreadable { path: path.into(), source })?;
        Config::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |what: &str, e: String| ConfigError::Invalid(format!("{what}: {e}"));
        self.pipeline.extraction.validate().map_err(|e| bad("pipeline.extraction", e.to_string()))?;
        self.pipeline.retrieval.validate().map_err(|e| bad("pipeline.retrieval", e))?;
        self.sandbox.validate().map_err(|e| bad("sandbox", e.to_string()))?;
        if !(self.cache.ttl_hours > 0.0) {
            return Err(bad("cache.ttl_hours", "must be positive".into()));
        }
        if self.build.timeout_secs == 0 {
            return Err(bad("build.timeout_secs", "must be positive".into()));
        }
        self.server.bind.parse::<std::net::SocketAddr>().map_err(|e| bad("server.bind", e.to_string()))?;
        Ok(())
    }

    /// The repair pipeline with the configured backends, sources and cache.
    pub fn pipeline(&self) -> Result<Pipeline, ConfigError> {
        let hypothesis = self.generator.hypothesis.build("hypothesis")?;
        let synthesis = match &self.generator.synthesis {
            Some(choice) => choice.build("synthesis")?,
            None => hypothesis.clone(),
        };
        let mut pipeline = Pipeline::new(self.pipeline.clone(), hypothesis, synthesis, self.sources.build());
        if self.cache.enabled {
            let ttl_ms = (self.cache.ttl_hours * 3_600_000.0) as u64;
            let path = self.cache.path.clone().unwrap_or_else(warp_core::cache::default_cache_path);
            let cache = SearchCache::open(&path, ttl_ms).unwrap_or_else(|e| {
                log::warn!("search cache {} unavailable ({e}); caching in memory", path.display());
                SearchCache::in_memory(ttl_ms)
            });
            pipeline = pipeline.with_cache(Arc::new(cache));
        }
        Ok(pipeline)
    }

    pub fn eval_config(&self) -> EvalConfig {
        let mut c = EvalConfig { sandbox: self.sandbox.clone(), ..EvalConfig::default() };
        if let Some(p) = self.eval.parallelism {
            c.parallelism = p.max(1);
        }
        c
    }

    /// Which source kinds will be queried.
    pub fn source_kinds(&self) -> Vec<SourceKind> {
        self.sources.build().kinds()
    }
}
