//! The session engine behind the CLI and the HTTP API.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tokio::sync::broadcast;
use warp_core::diagnostics::{capture_command, detect_error_signature};
use warp_core::diff::apply_diff;
use warp_core::pipeline::StageEvent;
use warp_core::retrieval::EvidenceSnippet;
use warp_core::{FinalSolution, Pipeline, RawCapture, RepairOutcome};

use crate::session::{Session, SessionError, Status};
use crate::store::Store;

pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// One entry of the event stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceEvent {
    pub seq: u64,
    pub session_id: String,
    /// `status` for a session status change, `stage` for a pipeline stage.
    pub kind: EventKind,
    /// The new status name (`Building`, ...) or the pipeline stage (`hypothesis`, ...).
    pub stage: String,
    /// Session status when the event was emitted.
    pub status: Status,
    pub detail: String,
    /// Unix milliseconds.
    pub timestamp: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Status,
    Stage,
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0} not found")]
    NotFound(String),
    #[error(transparent)]
    InvalidState(#[from] SessionError),
    #[error("{path} changed since it was analyzed")]
    StaleFile { path: PathBuf },
    #[error("fix does not apply: {0}")]
    ContextMismatch(String),
    #[error("build failed to run: {0}")]
    Build(String),
    #[error("storage: {0}")]
    Storage(String),
}

impl ServiceError {
    /// Stable machine-readable name, used in API error payloads.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::NotFound(_) => "NotFound",
            ServiceError::InvalidState(_) => "InvalidState",
            ServiceError::StaleFile { .. } => "StaleFile",
            ServiceError::ContextMismatch(_) => "ContextMismatch",
            ServiceError::Build(_) => "BuildFailure",
            ServiceError::Storage(_) => "Storage",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub error_id: String,
    pub file: PathBuf,
    pub line: u32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub command_line: String,
    pub working_dir: PathBuf,
    pub status: Status,
    pub error: Option<ErrorSummary>,
    pub solutions: usize,
    pub builds: u32,
}

impl From<&Session> for SessionSummary {
    fn from(s: &Session) -> Self {
        SessionSummary {
            id: s.id.clone(),
            command_line: s.command_line.clone(),
            working_dir: s.working_dir.clone(),
            status: s.status,
            error: s.error_context.as_ref().map(|c| ErrorSummary {
                error_id: c.error_id.id.clone(),
                file: c.file_path.clone(),
                line: c.line,
                message: c.raw_message.clone(),
            }),
            solutions: s.solutions.len(),
            builds: s.builds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRow {
    pub cited: bool,
    #[serde(flatten)]
    pub snippet: EvidenceSnippet,
}

/// A solution's evidence: cited snippets in citation order, then the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceView {
    pub solution_id: String,
    pub citations: Vec<String>,
    pub evidence: Vec<EvidenceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplyReport {
    pub solution_id: String,
    pub path: PathBuf,
    pub session: Session,
}

struct State {
    sessions: BTreeMap<String, Session>,
    store: Option<Store>,
    next_id: u64,
}

pub struct Service {
    pipeline: Pipeline,
    state: Mutex<State>,
    run_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    events: broadcast::Sender<ServiceEvent>,
    emit_lock: Mutex<()>,
    seq: AtomicU64,
    build_timeout: Duration,
}

impl std::fmt::Debug for Service {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Service").finish_non_exhaustive()
    }
}

impl Service {
    /// A service without persistence.
    pub fn in_memory(pipeline: Pipeline) -> Self {
        Service::with_store(pipeline, None, BTreeMap::new())
    }

    /// Opens the store at `path` and restores its sessions.
    pub fn open(pipeline: Pipeline, path: &Path, compact_every: usize) -> std::io::Result<Self> {
        let (store, sessions) = Store::open(path)?;
        Ok(Service::with_store(pipeline, Some(store.with_compaction_every(compact_every)), sessions))
    }

    fn with_store(pipeline: Pipeline, store: Option<Store>, mut sessions: BTreeMap<String, Session>) -> Self {
        let next_id = sessions.keys().filter_map(|k| k.strip_prefix('s')?.parse::<u64>().ok()).max().unwrap_or(0) + 1;
        let now = now_ms();
        let recovered: Vec<String> = sessions.values_mut().filter_map(|s| s.recover(now).then(|| s.id.clone())).collect();
        let (events, _) = broadcast::channel(1024);
        let service = Service {
            pipeline,
            state: Mutex::new(State { sessions, store, next_id }),
            run_locks: Mutex::default(),
            events,
            emit_lock: Mutex::default(),
            seq: AtomicU64::new(1),
            build_timeout: Duration::from_secs(300),
        };
        {
            let mut st = service.state.lock().unwrap();
            for id in recovered {
                log::info!("session {id} was interrupted; now Idle");
                let _ = persist(&mut st, &id);
            }
        }
        service
    }

    pub fn with_build_timeout(mut self, timeout: Duration) -> Self {
        self.build_timeout = timeout;
        self
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn subscribe(&self) -> broadcast::Receiver<ServiceEvent> {
        self.events.subscribe()
    }

    fn emit(&self, session_id: &str, kind: EventKind, stage: String, status: Status, detail: String) {
        let _g = self.emit_lock.lock().unwrap();
        let event = ServiceEvent {
            seq: self.seq.fetch_add(1, Ordering::SeqCst),
            session_id: session_id.into(),
            kind,
            stage,
            status,
            detail,
            timestamp: now_ms(),
        };
        let _ = self.events.send(event);
    }

    /// Applies `change` to a session, persists it and emits a status event
    /// when the status moved.
    fn update<T>(&self, id: &str, change: impl FnOnce(&mut Session) -> Result<T, SessionError>) -> Result<(T, Session), ServiceError> {
        let mut st = self.state.lock().unwrap();
        let session = st.sessions.get_mut(id).ok_or_else(|| ServiceError::NotFound(format!("session {id}")))?;
        let before = session.status;
        let out = change(session)?;
        let after = session.clone();
        persist(&mut st, id)?;
        if after.status != before {
            let detail = after.history.last().map(|h| h.detail.clone()).unwrap_or_default();
            self.emit(id, EventKind::Status, after.status.to_string(), after.status, detail);
        }
        Ok((out, after))
    }

    fn run_lock(&self, id: &str) -> Arc<Mutex<()>> {
        self.run_locks.lock().unwrap().entry(id.to_string()).or_default().clone()
    }

    pub fn create_session(&self, command_line: &str, working_dir: &Path) -> Result<Session, ServiceError> {
        let mut st = self.state.lock().unwrap();
        let id = format!("s{}", st.next_id);
        st.next_id += 1;
        let session = Session::new(id.clone(), command_line, working_dir, now_ms());
        st.sessions.insert(id.clone(), session.clone());
        persist(&mut st, &id)?;
        self.emit(&id, EventKind::Status, Status::Idle.to_string(), Status::Idle, "created".into());
        Ok(session)
    }

    /// The session with this command and directory, if one exists.
    pub fn find_session(&self, command_line: &str, working_dir: &Path) -> Option<Session> {
        let st = self.state.lock().unwrap();
        st.sessions.values().find(|s| s.command_line == command_line && s.working_dir == working_dir).cloned()
    }

    pub fn list(&self) -> Vec<SessionSummary> {
        self.state.lock().unwrap().sessions.values().map(SessionSummary::from).collect()
    }

    pub fn get(&self, id: &str) -> Result<Session, ServiceError> {
        self.state.lock().unwrap().sessions.get(id).cloned().ok_or_else(|| ServiceError::NotFound(format!("session {id}")))
    }

    pub fn solutions(&self, id: &str) -> Result<Vec<FinalSolution>, ServiceError> {
        Ok(self.get(id)?.solutions)
    }

    fn session_of(&self, solution_id: &str) -> Result<Session, ServiceError> {
        let st = self.state.lock().unwrap();
        st.sessions
            .values()
            .find(|s| s.solution(solution_id).is_some())
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("solution {solution_id}")))
    }

    pub fn evidence(&self, solution_id: &str) -> Result<EvidenceView, ServiceError> {
        let session = self.session_of(solution_id)?;
        let solution = session.solution(solution_id).unwrap();
        let mut rows: Vec<EvidenceRow> = solution
            .citations
            .iter()
            .filter_map(|id| session.evidence.get(id))
            .map(|s| EvidenceRow { cited: true, snippet: s.clone() })
            .collect();
        rows.extend(
            session
                .evidence
                .snippets
                .iter()
                .filter(|s| !solution.citations.contains(&s.id))
                .map(|s| EvidenceRow { cited: false, snippet: s.clone() }),
        );
        Ok(EvidenceView { solution_id: solution_id.into(), citations: solution.citations.clone(), evidence: rows })
    }

    /// Runs the session's build command and analyzes the result.
    pub fn build(&self, id: &str) -> Result<Session, ServiceError> {
        let lock = self.run_lock(id);
        let _running = lock.lock().unwrap();
        let (_, session) = self.update(id, |s| s.begin_build(now_ms()))?;
        match capture_command(&session.command_line, &session.working_dir, self.build_timeout) {
            Ok(capture) => self.analyze_locked(id, &capture),
            Err(e) => {
                let reason = e.to_string();
                self.update(id, |s| s.finish_clean(now_ms(), &format!("build did not start: {reason}")))?;
                Err(ServiceError::Build(reason))
            }
        }
    }

    /// Feeds an existing capture of the session's build through the pipeline.
    /// The session must be Building.
    pub fn run_pipeline(&self, id: &str, capture: &RawCapture) -> Result<Session, ServiceError> {
        let lock = self.run_lock(id);
        let _running = lock.lock().unwrap();
        self.analyze_locked(id, capture)
    }

    /// Moves the session to Building without running anything.
    pub fn begin_build(&self, id: &str) -> Result<Session, ServiceError> {
        let lock = self.run_lock(id);
        let _running = lock.lock().unwrap();
        Ok(self.update(id, |s| s.begin_build(now_ms()))?.1)
    }

    fn analyze_locked(&self, id: &str, capture: &RawCapture) -> Result<Session, ServiceError> {
        let status = self.get(id)?.status;
        if status != Status::Building {
            return Err(SessionError::InvalidTransition { from: status, to: Status::Analyzing }.into());
        }
        let Some((parsed, first)) = detect_error_signature(capture) else {
            let detail = if capture.exit_code == 0 { "build succeeded" } else { "build failed without a recognised error" };
            return Ok(self.update(id, |s| s.finish_clean(now_ms(), detail))?.1);
        };
        let message = parsed.diagnostics[first].message.clone();
        self.update(id, |s| s.begin_analysis(now_ms(), &message))?;
        let observer = |e: &StageEvent| {
            let detail = if e.detail.is_empty() { format!("{:?}", e.status) } else { format!("{:?}: {}", e.status, e.detail) };
            self.emit(id, EventKind::Stage, e.stage.to_string(), Status::Analyzing, detail);
        };
        let outcome = self.pipeline.repair(capture, &observer);
        let (_, session) = match outcome {
            RepairOutcome::Repaired(repair) => self.update(id, |s| s.offer(*repair, now_ms()))?,
            RepairOutcome::NoError { .. } => self.update(id, |s| s.give_up(now_ms(), "no error signature"))?,
            RepairOutcome::Failed { stage, reason, .. } => self.update(id, |s| s.give_up(now_ms(), &format!("{stage}: {reason}")))?,
        };
        Ok(session)
    }

    /// Writes the fix to disk if the file still matches what was analyzed.
    pub fn apply(&self, solution_id: &str) -> Result<ApplyReport, ServiceError> {
        let owner = self.session_of(solution_id)?;
        let lock = self.run_lock(&owner.id);
        let _running = lock.lock().unwrap();
        let session = self.get(&owner.id)?;
        if session.status != Status::AwaitingDecision {
            return Err(SessionError::InvalidTransition { from: session.status, to: Status::Applied }.into());
        }
        let solution = session.solution(solution_id).ok_or_else(|| ServiceError::NotFound(format!("solution {solution_id}")))?;
        let source = session.source.clone().ok_or_else(|| ServiceError::ContextMismatch("no source file recorded".into()))?;
        let current = std::fs::read(&source.path).map_err(|_| ServiceError::StaleFile { path: source.path.clone() })?;
        if sha256_hex(&current) != source.sha256 {
            return Err(ServiceError::StaleFile { path: source.path });
        }
        let text = String::from_utf8(current).map_err(|e| ServiceError::ContextMismatch(e.to_string()))?;
        let patched = apply_diff(&text, &solution.fix).map_err(|e| ServiceError::ContextMismatch(e.to_string()))?;
        write_atomically(&source.path, patched.as_bytes()).map_err(|e| ServiceError::Storage(e.to_string()))?;
        let (_, session) = self.update(&owner.id, |s| s.mark_applied(solution_id, now_ms()))?;
        Ok(ApplyReport { solution_id: solution_id.into(), path: source.path, session })
    }

    pub fn reject(&self, solution_id: &str) -> Result<Session, ServiceError> {
        let owner = self.session_of(solution_id)?;
        let lock = self.run_lock(&owner.id);
        let _running = lock.lock().unwrap();
        Ok(self.update(&owner.id, |s| s.mark_rejected(solution_id, now_ms()))?.1)
    }
}

fn persist(st: &mut State, id: &str) -> Result<(), ServiceError> {
    let State { sessions, store, .. } = st;
    if let (Some(store), Some(session)) = (store.as_mut(), sessions.get(id)) {
        store.put(session, sessions).map_err(|e| ServiceError::Storage(e.to_string()))?;
    }
    Ok(())
}

fn write_atomically(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("warp-tmp");
    std::fs::write(&tmp, bytes)?;
    if let Ok(meta) = std::fs::metadata(path) {
        std::fs::set_permissions(&tmp, meta.permissions())?;
    }
    std::fs::rename(&tmp, path)
}
