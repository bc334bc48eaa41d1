#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use warp_core::diagnostics::{Diagnostic, RawCapture, Severity, Tool};

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

#[derive(Debug, Deserialize, PartialEq)]
pub struct Labeled {
    pub tool: Tool,
    pub severity: Severity,
    pub file_path: PathBuf,
    pub line: u32,
    pub column: Option<u32>,
    pub message: String,
}

impl Labeled {
    pub fn matches(&self, d: &Diagnostic) -> bool {
        self.tool == d.tool
            && self.severity == d.severity
            && self.file_path == d.file_path
            && self.line == d.line
            && self.column == d.column
            && self.message == d.message
    }
}

pub struct CorpusCase {
    pub name: String,
    pub dir: PathBuf,
    pub capture: RawCapture,
    pub expected: Vec<Labeled>,
}

/// Loads every case directory of the recorded diagnostics corpus.
pub fn diagnostics_corpus() -> Vec<CorpusCase> {
    let root = fixtures_dir().join("diagnostics");
    let mut dirs: Vec<_> = fs::read_dir(&root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    dirs.into_iter()
        .map(|dir| {
            let cmd = fs::read_to_string(dir.join("cmd.txt")).unwrap();
            let stdout = fs::read(dir.join("stdout.txt")).unwrap();
            let stderr = fs::read(dir.join("stderr.txt")).unwrap();
            let expected: Vec<Labeled> =
                serde_json::from_slice(&fs::read(dir.join("expected.json")).unwrap()).unwrap();
            let mut capture = RawCapture::recorded(cmd.trim(), 1, stdout, stderr);
            capture.working_dir = dir.clone();
            CorpusCase {
                name: dir.file_name().unwrap().to_string_lossy().into_owned(),
                dir,
                capture,
                expected,
            }
        })
        .collect()
}
