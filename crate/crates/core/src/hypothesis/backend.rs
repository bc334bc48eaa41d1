use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::util::short_hash;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams { temperature: 0.0, max_tokens: 1024 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    /// Per-token log-probabilities, when the backend reports them.
    #[serde(default)]
    pub logprobs: Option<Vec<f64>>,
    #[serde(default)]
    pub usage: Usage,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub supports_logprobs: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("no recorded completion for prompt {0}")]
    NotRecorded(String),
}

/// A text generator standing in for the core or synthesis model.
pub trait GeneratorBackend: Send + Sync {
    fn identity(&self) -> String;
    fn capabilities(&self) -> Capabilities;
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<Completion, BackendError>;
}

/// Key under which replay fixtures store the completion for `prompt`.
pub fn prompt_hash(prompt: &str) -> String {
    short_hash(prompt.as_bytes(), 32)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ReplayEntry {
    Text(String),
    Full(Completion),
}

/// Serves completions recorded in a JSON object keyed by [`prompt_hash`].
///
/// Entries are either a plain string or a [`Completion`] object.
#[derive(Debug, Clone, Default)]
pub struct ReplayBackend {
    name: String,
    entries: BTreeMap<String, Completion>,
    logprobs: bool,
}

impl ReplayBackend {
    pub fn new(name: impl Into<String>) -> Self {
        ReplayBackend { name: name.into(), ..Default::default() }
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let bytes = fs::read(path)?;
        let map: BTreeMap<String, ReplayEntry> = serde_json::from_slice(&bytes)?;
        let mut backend = ReplayBackend::new(format!("replay:{}", path.file_name().unwrap_or_default().to_string_lossy()));
        for (key, entry) in map {
            let completion = match entry {
                ReplayEntry::Text(text) => Completion { text, ..Default::default() },
                ReplayEntry::Full(c) => c,
            };
            backend.logprobs |= completion.logprobs.is_some();
            backend.entries.insert(key, completion);
        }
        Ok(backend)
    }

    /// Records `completion` as the answer to `prompt`.
    pub fn with(mut self, prompt: &str, completion: impl Into<String>) -> Self {
        self.entries.insert(prompt_hash(prompt), Completion { text: completion.into(), ..Default::default() });
        self
    }

    pub fn with_completion(mut self, prompt: &str, completion: Completion) -> Self {
        self.logprobs |= completion.logprobs.is_some();
        self.entries.insert(prompt_hash(prompt), completion);
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl GeneratorBackend for ReplayBackend {
    fn identity(&self) -> String {
        self.name.clone()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { supports_logprobs: self.logprobs }
    }

    fn complete(&self, prompt: &str, _params: &GenerationParams) -> Result<Completion, BackendError> {
        let key = prompt_hash(prompt);
        self.entries.get(&key).cloned().ok_or(BackendError::NotRecorded(key))
    }
}

/// Wraps a backend and keeps every exchange so it can be saved as a replay fixture.
pub struct RecordingBackend<B> {
    inner: B,
    log: Mutex<BTreeMap<String, Completion>>,
}

impl<B: GeneratorBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        RecordingBackend { inner, log: Mutex::new(BTreeMap::new()) }
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let log = self.log.lock().unwrap();
        fs::write(path, serde_json::to_vec_pretty(&*log)?)
    }

    pub fn recorded(&self) -> usize {
        self.log.lock().unwrap().len()
    }
}

impl<B: GeneratorBackend> GeneratorBackend for RecordingBackend<B> {
    fn identity(&self) -> String {
        self.inner.identity()
    }

    fn capabilities(&self) -> Capabilities {
        self.inner.capabilities()
    }

    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<Completion, BackendError> {
        let completion = self.inner.complete(prompt, params)?;
        self.log.lock().unwrap().insert(prompt_hash(prompt), completion.clone());
        Ok(completion)
    }
}

/// A backend driven by a closure, for tests and scripted baselines.
pub struct FnBackend<F> {
    name: String,
    f: F,
}

impl<F> FnBackend<F>
where
    F: Fn(&str) -> Result<Completion, BackendError> + Send + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        FnBackend { name: name.into(), f }
    }
}

impl<F> GeneratorBackend for FnBackend<F>
where
    F: Fn(&str) -> Result<Completion, BackendError> + Send + Sync,
{
    fn identity(&self) -> String {
        self.name.clone()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities::default()
    }

    fn complete(&self, prompt: &str, _params: &GenerationParams) -> Result<Completion, BackendError> {
        (self.f)(prompt)
    }
}

impl<T: GeneratorBackend + ?Sized> GeneratorBackend for &T {
    fn identity(&self) -> String {
        (**self).identity()
    }
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<Completion, BackendError> {
        (**self).complete(prompt, params)
    }
}

impl<T: GeneratorBackend + ?Sized> GeneratorBackend for std::sync::Arc<T> {
    fn identity(&self) -> String {
        (**self).identity()
    }
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<Completion, BackendError> {
        (**self).complete(prompt, params)
    }
}

/// Settings for [`HttpBackend`]. The API key is read from `api_key_env`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpBackendConfig {
    /// Full URL of an OpenAI-compatible `chat/completions` endpoint.
    pub url: String,
    pub model: String,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub request_logprobs: bool,
}

fn default_key_env() -> String {
    "WARP_LLM_KEY".into()
}

fn default_timeout() -> u64 {
    60
}

pub struct HttpBackend {
    config: HttpBackendConfig,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build()
            .into();
        HttpBackend { config, agent }
    }
}

impl GeneratorBackend for HttpBackend {
    fn identity(&self) -> String {
        format!("http:{}", self.config.model)
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { supports_logprobs: self.config.request_logprobs }
    }

    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<Completion, BackendError> {
        let mut body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        });
        if self.config.request_logprobs {
            body["logprobs"] = json!(true);
        }
        let mut request = self.agent.post(&self.config.url);
        if let Ok(key) = std::env::var(&self.config.api_key_env) {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let reply: Value = request
            .send_json(&body)
            .and_then(|mut r| r.body_mut().read_json())
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        parse_chat_reply(&reply)
    }
}

pub(crate) fn parse_chat_reply(reply: &Value) -> Result<Completion, BackendError> {
    let choice = &reply["choices"][0];
    let text = choice["message"]["content"]
        .as_str()
        .ok_or_else(|| BackendError::Unavailable("reply has no message content".into()))?
        .to_string();
    let logprobs = choice["logprobs"]["content"]
        .as_array()
        .map(|items| items.iter().filter_map(|t| t["logprob"].as_f64()).collect::<Vec<_>>())
        .filter(|v| !v.is_empty());
    let count = |k: &str| reply["usage"][k].as_u64().unwrap_or(0) as u32;
    Ok(Completion {
        text,
        logprobs,
        usage: Usage { prompt_tokens: count("prompt_tokens"), completion_tokens: count("completion_tokens") },
    })
}

/// Loads every `*.json` replay file in `dir` into one backend.
pub fn replay_from_dir(dir: &Path, name: &str) -> std::io::Result<ReplayBackend> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut merged = ReplayBackend::new(name);
    for f in files {
        let part = ReplayBackend::from_file(&f)?;
        merged.logprobs |= part.logprobs;
        merged.entries.extend(part.entries);
    }
    Ok(merged)
}
