use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{RetrievalConfig, SearchQuery, SearchResultDoc, SourceKind};
use crate::util::short_hash;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum SourceError {
    #[error("{kind} timed out")]
    SourceTimeout { kind: SourceKind },
    #[error("{kind} failed: {message}")]
    SourceError { kind: SourceKind, message: String },
    #[error("{kind} has no recording for {key}")]
    NotRecorded { kind: SourceKind, key: String },
}

/// A searchable evidence source. Implementations must tolerate concurrent calls.
pub trait SourceClient: Send + Sync {
    fn kind(&self) -> SourceKind;
    fn search(&self, query: &str, limit: usize) -> Result<Vec<SearchResultDoc>, SourceError>;
}

/// Fixture file name for a request.
pub(crate) fn request_key(kind: SourceKind, query: &str) -> String {
    short_hash(format!("{}\n{query}", kind.slug()).as_bytes(), 16)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RecordedResponse {
    source: SourceKind,
    query: String,
    docs: Vec<SearchResultDoc>,
}

/// Replays responses stored as `<dir>/<request-key>.json`.
#[derive(Debug, Clone)]
pub struct FixtureClient {
    kind: SourceKind,
    dir: PathBuf,
}

impl FixtureClient {
    pub fn new(kind: SourceKind, dir: impl Into<PathBuf>) -> Self {
        FixtureClient { kind, dir: dir.into() }
    }

    pub fn path_for(&self, query: &str) -> PathBuf {
        self.dir.join(format!("{}.json", request_key(self.kind, query)))
    }

    /// Writes a recording that this client will serve for `query`.
    pub fn record(&self, query: &str, docs: &[SearchResultDoc]) -> std::io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let rec = RecordedResponse { source: self.kind, query: query.to_string(), docs: docs.to_vec() };
        fs::write(self.path_for(query), serde_json::to_vec_pretty(&rec)?)
    }
}

impl SourceClient for FixtureClient {
    fn kind(&self) -> SourceKind {
        self.kind
    }

    fn search(&self, query: &str, limit: usize) -> Result<Vec<SearchResultDoc>, SourceError> {
        let path = self.path_for(query);
        let bytes = fs::read(&path).map_err(|_| SourceError::NotRecorded {
            kind: self.kind,
            key: path.file_name().unwrap().to_string_lossy().into_owned(),
        })?;
        let rec: RecordedResponse = serde_json::from_slice(&bytes)
            .map_err(|e| SourceError::SourceError { kind: self.kind, message: format!("bad fixture: {e}") })?;
        Ok(rec.docs.into_iter().take(limit).collect())
    }
}

/// Passes searches through to `inner` and saves every response as a fixture.
pub struct RecordingClient<C> {
    inner: C,
    fixtures: FixtureClient,
}

impl<C: SourceClient> RecordingClient<C> {
    pub fn new(inner: C, dir: &Path) -> Self {
        let fixtures = FixtureClient::new(inner.kind(), dir);
        RecordingClient { inner, fixtures }
    }
}

impl<C: SourceClient> SourceClient for RecordingClient<C> {
    fn kind(&self) -> SourceKind {
        self.inner.kind()
    }

    fn search(&self, query: &str, limit: usize) -> Result<Vec<SearchResultDoc>, SourceError> {
        let docs = self.inner.search(query, limit)?;
        if let Err(e) = self.fixtures.record(query, &docs) {
            log::warn!("could not record {} response: {e}", self.kind());
        }
        Ok(docs)
    }
}

/// Always fails; models an unreachable source.
#[derive(Debug, Clone)]
pub struct FailingClient(pub SourceKind);

impl SourceClient for FailingClient {
    fn kind(&self) -> SourceKind {
        self.0
    }

    fn search(&self, _query: &str, _limit: usize) -> Result<Vec<SearchResultDoc>, SourceError> {
        Err(SourceError::SourceError { kind: self.0, message: "connection refused".into() })
    }
}

/// Sleeps before delegating; used to exercise timeouts.
pub struct DelayedClient<C> {
    pub inner: C,
    pub delay: Duration,
}

impl<C: SourceClient> SourceClient for DelayedClient<C> {
    fn kind(&self) -> SourceKind {
        self.inner.kind()
    }

    fn search(&self, query: &str, limit: usize) -> Result<Vec<SearchResultDoc>, SourceError> {
        thread::sleep(self.delay);
        self.inner.search(query, limit)
    }
}

/// The clients available to one retrieval run, at most one per kind.
#[derive(Clone, Default)]
pub struct Sources {
    clients: BTreeMap<SourceKind, Arc<dyn SourceClient>>,
}

impl Sources {
    pub fn new() -> Self {
        Sources::default()
    }

    pub fn with(mut self, client: impl SourceClient + 'static) -> Self {
        self.clients.insert(client.kind(), Arc::new(client));
        self
    }

    pub fn with_arc(mut self, client: Arc<dyn SourceClient>) -> Self {
        self.clients.insert(client.kind(), client);
        self
    }

    /// Fixture clients for every kind, reading `<dir>/<kind-slug>/`.
    pub fn fixtures(dir: &Path) -> Self {
        SourceKind::ALL
            .into_iter()
            .fold(Sources::new(), |s, k| s.with(FixtureClient::new(k, dir.join(k.slug()))))
    }

    pub fn failing() -> Self {
        SourceKind::ALL.into_iter().fold(Sources::new(), |s, k| s.with(FailingClient(k)))
    }

    pub fn get(&self, kind: SourceKind) -> Option<&Arc<dyn SourceClient>> {
        self.clients.get(&kind)
    }

    pub fn kinds(&self) -> Vec<SourceKind> {
        self.clients.keys().copied().collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub docs: Vec<SearchResultDoc>,
    pub error: Option<SourceError>,
}

fn settle(kind: SourceKind, result: Option<Result<Vec<SearchResultDoc>, SourceError>>, k: usize) -> SearchOutcome {
    match result {
        Some(Ok(mut docs)) => {
            let mut seen = std::collections::HashSet::new();
            docs.retain(|d| seen.insert(d.url.clone()));
            docs.truncate(k);
            SearchOutcome { docs, error: None }
        }
        Some(Err(e)) => {
            log::warn!("{e}");
            SearchOutcome { docs: Vec::new(), error: Some(e) }
        }
        None => {
            let e = SourceError::SourceTimeout { kind: kind };
            log::warn!("{e}");
            SearchOutcome { docs: Vec::new(), error: Some(e) }
        }
    }
}

fn spawn_search(
    client: Arc<dyn SourceClient>,
    query: String,
    k: usize,
) -> mpsc::Receiver<Result<Vec<SearchResultDoc>, SourceError>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let _ = tx.send(client.search(&query, k));
    });
    rx
}

/// Runs one query against `client` with the per-source timeout. Failures and
/// timeouts yield no documents and are reported in the outcome, never raised.
pub fn search_source(query: &SearchQuery, client: Arc<dyn SourceClient>, config: &RetrievalConfig) -> SearchOutcome {
    let kind = client.kind();
    let rx = spawn_search(client, query.text.clone(), config.k);
    settle(kind, rx.recv_timeout(Duration::from_millis(config.per_source_timeout_ms)).ok(), config.k)
}

/// Runs every query against its target source concurrently under a shared
/// deadline. Outcomes are returned in query order; queries whose target has
/// no client get an empty outcome.
pub fn fetch_all(queries: &[SearchQuery], sources: &Sources, config: &RetrievalConfig) -> Vec<SearchOutcome> {
    let deadline = Instant::now() + Duration::from_millis(config.per_source_timeout_ms);
    let pending: Vec<_> = queries
        .iter()
        .map(|q| sources.get(q.target).map(|c| (q.target, spawn_search(c.clone(), q.text.clone(), config.k))))
        .collect();
    pending
        .into_iter()
        .map(|p| match p {
            Some((kind, rx)) => {
                let left = deadline.saturating_duration_since(Instant::now());
                settle(kind, rx.recv_timeout(left).ok(), config.k)
            }
            None => SearchOutcome::default(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn docs(n: usize) -> Vec<SearchResultDoc> {
        (0..n)
            .map(|i| SearchResultDoc {
                url: format!("https://x/{i}"),
                title: format!("t{i}"),
                body: format!("body {i}"),
                source: SourceKind::StackOverflow,
                published_at: None,
                source_signals: Default::default(),
            })
            .collect()
    }

    fn query(text: &str) -> SearchQuery {
        SearchQuery { text: text.into(), target: SourceKind::StackOverflow, origin: BTreeSet::new() }
    }

    #[test]
    fn fixture_truncates_to_k() {
        let dir = tempfile::tempdir().unwrap();
        let client = FixtureClient::new(SourceKind::StackOverflow, dir.path());
        client.record("q", &docs(7)).unwrap();
        let out = search_source(&query("q"), Arc::new(client), &RetrievalConfig::default());
        assert_eq!(out.docs, docs(5));
        assert_eq!(out.error, None);
    }

    #[test]
    fn stalled_source_times_out() {
        let dir = tempfile::tempdir().unwrap();
        let inner = FixtureClient::new(SourceKind::StackOverflow, dir.path());
        inner.record("q", &docs(2)).unwrap();
        let client = DelayedClient { inner, delay: Duration::from_millis(500) };
        let cfg = RetrievalConfig { per_source_timeout_ms: 50, ..Default::default() };
        let started = Instant::now();
        let out = search_source(&query("q"), Arc::new(client), &cfg);
        assert!(started.elapsed() < Duration::from_millis(400));
        assert!(out.docs.is_empty());
        assert_eq!(out.error, Some(SourceError::SourceTimeout { kind: SourceKind::StackOverflow }));
    }

    #[test]
    fn failures_are_non_fatal() {
        let out = search_source(&query("q"), Arc::new(FailingClient(SourceKind::StackOverflow)), &RetrievalConfig::default());
        assert!(out.docs.is_empty());
        assert!(matches!(out.error, Some(SourceError::SourceError { .. })));
        let dir = tempfile::tempdir().unwrap();
        let out = search_source(
            &query("never recorded"),
            Arc::new(FixtureClient::new(SourceKind::StackOverflow, dir.path())),
            &RetrievalConfig::default(),
        );
        assert!(matches!(out.error, Some(SourceError::NotRecorded { .. })));
    }

    #[test]
    fn fan_out_keeps_query_order() {
        let dir = tempfile::tempdir().unwrap();
        let client = FixtureClient::new(SourceKind::StackOverflow, dir.path());
        client.record("a", &docs(1)).unwrap();
        client.record("b", &docs(3)).unwrap();
        let sources = Sources::new().with(client);
        let mut web = query("c");
        web.target = SourceKind::WebSearch;
        let out = fetch_all(&[query("b"), query("a"), web], &sources, &RetrievalConfig::default());
        assert_eq!(out.iter().map(|o| o.docs.len()).collect::<Vec<_>>(), [3, 1, 0]);
    }

    #[test]
    fn recording_client_writes_fixtures() {
        let dir = tempfile::tempdir().unwrap();
        let src = tempfile::tempdir().unwrap();
        let inner = FixtureClient::new(SourceKind::StackOverflow, src.path());
        inner.record("q", &docs(2)).unwrap();
        RecordingClient::new(inner, dir.path()).search("q", 5).unwrap();
        let replay = FixtureClient::new(SourceKind::StackOverflow, dir.path());
        assert_eq!(replay.search("q", 5).unwrap().len(), 2);
    }
}
