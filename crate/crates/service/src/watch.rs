//! Watch mode: re-run a session's build when a source file is saved.

use std::path::{Component, Path};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use notify::{EventKind, RecursiveMode, Watcher};

use crate::service::{Service, ServiceError};
use crate::session::{Session, Status};

pub const DEFAULT_DEBOUNCE: Duration = Duration::from_millis(300);

const SOURCE_EXTENSIONS: &[&str] = &["c", "h", "cc", "cpp", "cxx", "hh", "hpp", "hxx", "py", "go", "mod"];
const SKIPPED_DIRS: &[&str] = &["target", "node_modules", "__pycache__", "build"];

/// Whether a change to `path` (under `root`) should trigger a rebuild.
/// Build outputs, editor swap files and anything under hidden or build
/// directories are ignored.
pub fn is_relevant(path: &Path, root: &Path) -> bool {
    let rel = path.strip_prefix(root).unwrap_or(path);
    let mut parts = rel.components().filter_map(|c| match c {
        Component::Normal(s) => s.to_str(),
        _ => None,
    });
    let Some(name) = rel.file_name().and_then(|n| n.to_str()) else { return false };
    if name.starts_with('.') || name.ends_with('~') {
        return false;
    }
    let ext_ok = Path::new(name).extension().and_then(|e| e.to_str()).is_some_and(|e| SOURCE_EXTENSIONS.contains(&e));
    ext_ok && !parts.any(|p| p != name && (p.starts_with('.') || SKIPPED_DIRS.contains(&p)))
}

/// Trailing-edge debounce: fires once `window` has passed since the last touch.
#[derive(Debug, Clone)]
pub struct Debounce {
    window: Duration,
    due: Option<Instant>,
}

impl Debounce {
    pub fn new(window: Duration) -> Self {
        Debounce { window, due: None }
    }

    pub fn touch(&mut self, now: Instant) {
        self.due = Some(now + self.window);
    }

    pub fn pending(&self) -> bool {
        self.due.is_some()
    }

    /// True (once) when the window has elapsed.
    pub fn fire(&mut self, now: Instant) -> bool {
        match self.due {
            Some(d) if now >= d => {
                self.due = None;
                true
            }
            _ => false,
        }
    }

    /// How long to sleep before the next check.
    pub fn wait(&self, now: Instant, idle: Duration) -> Duration {
        self.due.map_or(idle, |d| d.saturating_duration_since(now))
    }
}

/// Rebuilds session `id` after each debounced burst of source changes, and
/// once at start. A pending decision is rejected first, since the edit
/// supersedes it. Returns when `stop` is set.
pub fn watch_session(
    service: &Service,
    id: &str,
    debounce: Duration,
    stop: &AtomicBool,
    mut on_build: impl FnMut(Result<&Session, &ServiceError>),
) -> Result<(), ServiceError> {
    let root = service.get(id)?.working_dir;
    let root = root.canonicalize().unwrap_or(root);
    let (tx, rx) = mpsc::channel();
    let mut watcher = notify::recommended_watcher(move |ev: notify::Result<notify::Event>| {
        let _ = tx.send(ev);
    })
    .map_err(|e| ServiceError::Build(format!("cannot watch {}: {e}", root.display())))?;
    watcher
        .watch(&root, RecursiveMode::Recursive)
        .map_err(|e| ServiceError::Build(format!("cannot watch {}: {e}", root.display())))?;

    let mut rebuild = |service: &Service| {
        if let Ok(s) = service.get(id) {
            if s.status == Status::AwaitingDecision {
                if let Some(first) = s.solutions.first() {
                    let _ = service.reject(&first.id);
                }
            }
        }
        let result = service.build(id);
        on_build(result.as_ref());
    };

    rebuild(service);
    let mut timer = Debounce::new(debounce);
    while !stop.load(Ordering::SeqCst) {
        let wait = timer.wait(Instant::now(), Duration::from_millis(100)).min(Duration::from_millis(100));
        match rx.recv_timeout(wait) {
            Ok(Ok(ev)) => {
                let interesting = matches!(ev.kind, EventKind::Create(_) | EventKind::Modify(_) | EventKind::Remove(_))
                    && !matches!(ev.kind, EventKind::Modify(notify::event::ModifyKind::Metadata(_)));
                if interesting && ev.paths.iter().any(|p| is_relevant(p, &root)) {
                    timer.touch(Instant::now());
                }
            }
            Ok(Err(e)) => log::warn!("watch error: {e}"),
            Err(mpsc::RecvTimeoutError::Timeout) => {}
            Err(mpsc::RecvTimeoutError::Disconnected) => break,
        }
        if timer.fire(Instant::now()) {
            rebuild(service);
        }
    }
    Ok(())
}

/// Runs [`watch_session`] on a thread; dropping the handle does not stop it.
pub fn spawn_watch(service: Arc<Service>, id: String, debounce: Duration, stop: Arc<AtomicBool>) -> std::thread::JoinHandle<()> {
    std::thread::spawn(move || {
        let log_build = |r: Result<&Session, &ServiceError>| match r {
            Ok(s) => log::info!("{}: {} ({} solution(s))", s.id, s.status, s.solutions.len()),
            Err(e) => log::warn!("{id}: {e}"),
        };
        if let Err(e) = watch_session(&service, &id, debounce, &stop, log_build) {
            log::error!("watch {id}: {e}");
        }
    })
}
