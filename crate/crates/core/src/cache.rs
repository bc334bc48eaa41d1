//! Search response cache with per-key single-flight fetching.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::retrieval::{SearchResultDoc, SourceClient, SourceError, SourceKind};
use crate::text::words;
use crate::util::{now_ms, short_hash};

pub const DEFAULT_TTL_MS: u64 = 24 * 60 * 60 * 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub value: Vec<SearchResultDoc>,
    /// Unix milliseconds.
    pub stored_at: u64,
    pub ttl_ms: u64,
}

impl CacheEntry {
    pub fn is_fresh(&self, now: u64) -> bool {
        now < self.stored_at.saturating_add(self.ttl_ms)
    }
}

/// Key for a request: source kind plus the query lowercased with
/// whitespace collapsed.
pub fn cache_key(kind: SourceKind, query: &str) -> String {
    let normalized = words(query).join(" ");
    short_hash(format!("{}\n{normalized}", kind.slug()).as_bytes(), 32)
}

type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub struct SearchCache {
    ttl_ms: u64,
    entries: Mutex<HashMap<String, CacheEntry>>,
    flights: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    log: Option<Mutex<File>>,
    clock: Clock,
}

impl std::fmt::Debug for SearchCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SearchCache").field("ttl_ms", &self.ttl_ms).finish_non_exhaustive()
    }
}

impl SearchCache {
    pub fn in_memory(ttl_ms: u64) -> Self {
        SearchCache {
            ttl_ms,
            entries: Mutex::default(),
            flights: Mutex::default(),
            log: None,
            clock: Arc::new(now_ms),
        }
    }

    /// Opens a cache persisted as JSON lines at `path`; expired and
    /// unreadable lines are skipped.
    pub fn open(path: &Path, ttl_ms: u64) -> std::io::Result<Self> {
        let mut cache = Self::in_memory(ttl_ms);
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        if path.exists() {
            let now = (cache.clock)();
            let entries = cache.entries.get_mut().unwrap();
            for line in BufReader::new(File::open(path)?).lines() {
                match serde_json::from_str::<CacheEntry>(&line?) {
                    Ok(e) if e.is_fresh(now) => {
                        entries.insert(e.key.clone(), e);
                    }
                    Ok(_) => {}
                    Err(e) => log::warn!("skipping cache line in {}: {e}", path.display()),
                }
            }
        }
        cache.log = Some(Mutex::new(OpenOptions::new().create(true).append(true).open(path)?));
        Ok(cache)
    }

    pub fn with_clock(mut self, clock: impl Fn() -> u64 + Send + Sync + 'static) -> Self {
        self.clock = Arc::new(clock);
        self
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn fresh(&self, key: &str) -> Option<Vec<SearchResultDoc>> {
        let now = (self.clock)();
        let mut entries = self.entries.lock().unwrap();
        match entries.get(key) {
            Some(e) if e.is_fresh(now) => Some(e.value.clone()),
            Some(_) => {
                entries.remove(key);
                None
            }
            None => None,
        }
    }

    /// Serves an unexpired entry or runs `fetch`, storing a successful result.
    /// Concurrent callers for the same key share one fetch; errors are
    /// returned without being cached.
    pub fn lookup_or_fetch<E>(
        &self,
        key: &str,
        fetch: impl FnOnce() -> Result<Vec<SearchResultDoc>, E>,
    ) -> Result<Vec<SearchResultDoc>, E> {
        if let Some(v) = self.fresh(key) {
            return Ok(v);
        }
        let flight = self.flights.lock().unwrap().entry(key.to_string()).or_default().clone();
        let _guard = flight.lock().unwrap();
        if let Some(v) = self.fresh(key) {
            return Ok(v);
        }
        let value = fetch()?;
        let entry = CacheEntry { key: key.to_string(), value: value.clone(), stored_at: (self.clock)(), ttl_ms: self.ttl_ms };
        if let Some(log) = &self.log {
            let line = serde_json::to_string(&entry).expect("cache entry serializes");
            if let Err(e) = writeln!(log.lock().unwrap(), "{line}") {
                log::warn!("cache write failed: {e}");
            }
        }
        self.entries.lock().unwrap().insert(key.to_string(), entry);
        drop(_guard);
        self.flights.lock().unwrap().remove(key);
        Ok(value)
    }
}

/// A [`SourceClient`] that answers through a [`SearchCache`].
pub struct CachedClient {
    inner: Arc<dyn SourceClient>,
    cache: Arc<SearchCache>,
}

impl CachedClient {
    pub fn new(inner: Arc<dyn SourceClient>, cache: Arc<SearchCache>) -> Self {
        CachedClient { inner, cache }
    }
}

impl SourceClient for CachedClient {
    fn kind(&self) -> SourceKind {
        self.inner.kind()
    }

    fn search(&self, query: &str, limit: usize) -> Result<Vec<SearchResultDoc>, SourceError> {
        let key = format!("{}#{limit}", cache_key(self.inner.kind(), query));
        self.cache.lookup_or_fetch(&key, || self.inner.search(query, limit))
    }
}

/// Default cache location under the user's cache directory.
pub fn default_cache_path() -> PathBuf {
    let base = std::env::var_os("XDG_CACHE_HOME")
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".cache")))
        .unwrap_or_else(std::env::temp_dir);
    base.join("warp").join("search-cache.jsonl")
}
