#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use warp_core::cache::SearchCache;
use warp_core::eval::BenchmarkAssets;
use warp_core::retrieval::Sources;
use warp_core::{Pipeline, PipelineConfig};
use warp_service::Service;

pub fn mini() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/benchmark/mini")
}

pub fn case_dir(case: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/benchmark/cases").join(case)
}

pub fn assets() -> BenchmarkAssets {
    BenchmarkAssets::beside(&mini().join("dataset.jsonl"))
}

/// Replay backends and the recorded web responses of the mini benchmark.
pub fn fixture_pipeline() -> Pipeline {
    let a = assets();
    a.pipeline(PipelineConfig::default(), Sources::fixtures(&a.web_dir)).unwrap()
}

pub fn cached_pipeline() -> Pipeline {
    fixture_pipeline().with_cache(Arc::new(SearchCache::in_memory(24 * 3_600_000)))
}

pub fn failing_pipeline() -> Pipeline {
    assets().pipeline(PipelineConfig::default(), Sources::failing()).unwrap()
}

pub fn service() -> Arc<Service> {
    Arc::new(Service::in_memory(fixture_pipeline()))
}

/// A scratch project holding the case's broken source as `main.c`.
pub struct Project {
    pub dir: tempfile::TempDir,
    pub case: PathBuf,
}

pub const SEMICOLON: &str = "c-missing-semicolon";

impl Project {
    pub fn new(case: &str) -> Project {
        let case = case_dir(case);
        let dir = tempfile::tempdir().unwrap();
        std::fs::copy(case.join("broken.c"), dir.path().join("main.c")).unwrap();
        Project { dir, case }
    }

    pub fn path(&self) -> PathBuf {
        self.dir.path().canonicalize().unwrap()
    }

    pub fn source(&self) -> PathBuf {
        self.path().join("main.c")
    }

    pub fn compiles(&self) -> bool {
        Command::new("gcc").args(["-c", "main.c", "-o", "/dev/null"]).current_dir(self.path()).stderr(std::process::Stdio::null()).status().unwrap().success()
    }

    pub fn fixed(&self) -> String {
        std::fs::read_to_string(self.case.join("fixed.c")).unwrap()
    }
}

pub const BUILD: &str = "gcc -c main.c";
