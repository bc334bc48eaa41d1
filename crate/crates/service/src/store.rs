//! Single-file session store: an append-only JSON-lines log of session
//! states, compacted now and then into one snapshot line.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::session::Session;

pub const DEFAULT_COMPACT_EVERY: usize = 200;

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Snapshot { sessions: Vec<Session> },
    Put { session: Box<Session> },
}

pub struct Store {
    path: PathBuf,
    file: File,
    since_compaction: usize,
    compact_every: usize,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("path", &self.path).finish_non_exhaustive()
    }
}

fn read_records(path: &Path) -> std::io::Result<(BTreeMap<String, Session>, usize)> {
    let mut sessions = BTreeMap::new();
    let mut puts = 0;
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((sessions, 0)),
        Err(e) => return Err(e),
    };
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        // A crash mid-append leaves a torn last line; skip anything unparsable.
        match serde_json::from_str::<Record>(&line) {
            Ok(Record::Snapshot { sessions: all }) => {
                sessions = all.into_iter().map(|s| (s.id.clone(), s)).collect();
                puts = 0;
            }
            Ok(Record::Put { session }) => {
                sessions.insert(session.id.clone(), *session);
                puts += 1;
            }
            Err(e) => log::warn!("{}:{}: skipping unreadable record: {e}", path.display(), n + 1),
        }
    }
    Ok((sessions, puts))
}

impl Store {
    /// Opens (or creates) the store and returns the sessions it holds.
    pub fn open(path: &Path) -> std::io::Result<(Store, BTreeMap<String, Session>)> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let (sessions, puts) = read_records(path)?;
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let store = Store { path: path.to_path_buf(), file, since_compaction: puts, compact_every: DEFAULT_COMPACT_EVERY };
        Ok((store, sessions))
    }

    pub fn with_compaction_every(mut self, n: usize) -> Self {
        self.compact_every = n.max(1);
        self
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends the current state of one session, compacting when due.
    /// `all` is the full session table after the change.
    pub fn put(&mut self, session: &Session, all: &BTreeMap<String, Session>) -> std::io::Result<()> {
        let mut line = serde_json::to_string(&Record::Put { session: Box::new(session.clone()) })?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()?;
        self.since_compaction += 1;
        if self.since_compaction >= self.compact_every {
            self.compact(all)?;
        }
        Ok(())
    }

    /// Rewrites the file as a single snapshot record (write, fsync, rename).
    pub fn compact(&mut self, all: &BTreeMap<String, Session>) -> std::io::Result<()> {
        let tmp = self.path.with_extension("compacting");
        {
            let mut f = File::create(&tmp)?;
            let rec = Record::Snapshot { sessions: all.values().cloned().collect() };
            f.write_all(serde_json::to_string(&rec)?.as_bytes())?;
            f.write_all(b"\n")?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &self.path)?;
        self.file = OpenOptions::new().append(true).open(&self.path)?;
        self.since_compaction = 0;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_replay_and_compaction() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sessions.jsonl");
        let (store, loaded) = Store::open(&path).unwrap();
        assert!(loaded.is_empty());
        let mut store = store.with_compaction_every(3);
        let mut all = BTreeMap::new();
        for i in 0..5 {
            let s = Session::new(format!("s{i}"), "make", "/w", i);
            all.insert(s.id.clone(), s.clone());
            store.put(&s, &all).unwrap();
        }
        let lines = fs::read_to_string(&path).unwrap().lines().count();
        assert_eq!(lines, 3, "snapshot plus two puts");
        drop(store);
        let (_, again) = Store::open(&path).unwrap();
        assert_eq!(again, all);
    }

    #[test]
    fn torn_tail_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let (mut store, _) = Store::open(&path).unwrap();
        let s = Session::new("s1", "make", "/w", 0);
        let all = BTreeMap::from([(s.id.clone(), s.clone())]);
        store.put(&s, &all).unwrap();
        drop(store);
        OpenOptions::new().append(true).open(&path).unwrap().write_all(b"{\"record\":\"put\",\"sess").unwrap();
        let (_, loaded) = Store::open(&path).unwrap();
        assert_eq!(loaded, all);
    }
}
