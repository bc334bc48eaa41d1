//! Compile-and-run checks for candidate fixes.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use wait_timeout::ChildExt;

use super::BenchmarkInstance;
use crate::diagnostics::LanguageId;
use crate::diff::apply_diff;
use crate::synthesis::FinalSolution;

/// Argument templates; `{file}`, `{out}` and `{cache}` are substituted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LanguageCommands {
    pub compile: Vec<String>,
    pub run: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SandboxSpec {
    pub languages: BTreeMap<LanguageId, LanguageCommands>,
    pub env: BTreeMap<String, String>,
    pub time_limit_secs: u64,
    pub network_disabled: bool,
    /// Keep scratch directories for inspection instead of deleting them.
    pub keep_scratch: bool,
    /// Shared build caches; defaults to a directory under the system temp dir.
    pub cache_dir: Option<PathBuf>,
}

fn argv(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl Default for SandboxSpec {
    fn default() -> Self {
        let languages = BTreeMap::from([
            (LanguageId::C, LanguageCommands { compile: argv(&["gcc", "-std=c11", "-o", "{out}", "{file}", "-lm"]), run: argv(&["{out}"]) }),
            (LanguageId::Cpp, LanguageCommands { compile: argv(&["g++", "-std=c++17", "-o", "{out}", "{file}"]), run: argv(&["{out}"]) }),
            (LanguageId::Python, LanguageCommands { compile: argv(&["python3", "{file}"]), run: argv(&["python3", "{file}"]) }),
            (LanguageId::Go, LanguageCommands { compile: argv(&["go", "build", "-o", "{out}", "{file}"]), run: argv(&["{out}"]) }),
        ]);
        let env = [
            ("GOCACHE", "{cache}/go-build"),
            ("GOPATH", "{cache}/gopath"),
            ("GOPROXY", "off"),
            ("GOTOOLCHAIN", "local"),
            ("GOFLAGS", "-mod=mod"),
            ("PYTHONDONTWRITEBYTECODE", "1"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        SandboxSpec { languages, env, time_limit_secs: 30, network_disabled: true, keep_scratch: false, cache_dir: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum SandboxFailure {
    #[error("no sandbox commands for {0}")]
    NoCommands(LanguageId),
    #[error("invalid sandbox spec: {0}")]
    InvalidSpec(String),
    #[error("sandbox infrastructure failed: {0}")]
    Infrastructure(String),
}

impl SandboxSpec {
    pub fn validate(&self) -> Result<(), SandboxFailure> {
        if self.time_limit_secs == 0 {
            return Err(SandboxFailure::InvalidSpec("time limit must be positive".into()));
        }
        if !self.network_disabled {
            return Err(SandboxFailure::InvalidSpec("sandbox runs must have networking disabled".into()));
        }
        if let Some((lang, _)) = self.languages.iter().find(|(_, c)| c.compile.is_empty() || c.run.is_empty()) {
            return Err(SandboxFailure::InvalidSpec(format!("empty command for {lang}")));
        }
        Ok(())
    }

    fn cache(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| std::env::temp_dir().join("warp-sandbox-cache"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub compiled: bool,
    /// `None` when the instance has no unit tests.
    pub semantically_correct: Option<bool>,
}

fn program_exists(program: &str) -> bool {
    if program.contains('/') {
        return Path::new(program).is_file();
    }
    std::env::var_os("PATH").is_some_and(|paths| std::env::split_paths(&paths).any(|d| d.join(program).is_file()))
}

struct RunResult {
    success: bool,
    stdout: Vec<u8>,
}

struct Scratch {
    dir: PathBuf,
    file: PathBuf,
    out: PathBuf,
    cache: PathBuf,
}

impl Scratch {
    fn expand(&self, s: &str) -> String {
        s.replace("{file}", &self.file.to_string_lossy())
            .replace("{out}", &self.out.to_string_lossy())
            .replace("{cache}", &self.cache.to_string_lossy())
    }
}

fn run(spec: &SandboxSpec, scratch: &Scratch, template: &[String], stdin: &str) -> Result<RunResult, SandboxFailure> {
    let mut args: Vec<String> = template.iter().map(|a| scratch.expand(a)).collect();
    if !program_exists(&args[0]) {
        return Err(SandboxFailure::Infrastructure(format!("{} not found", args[0])));
    }
    if spec.network_disabled {
        args.splice(0..0, ["unshare", "-r", "-n", "--"].map(String::from));
    }
    let mut cmd = Command::new(&args[0]);
    cmd.args(&args[1..])
        .current_dir(&scratch.dir)
        .env("HOME", &scratch.dir)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null());
    for (k, v) in &spec.env {
        cmd.env(k, scratch.expand(v));
    }
    let mut child = cmd.spawn().map_err(|e| SandboxFailure::Infrastructure(format!("cannot start {}: {e}", args[0])))?;
    let mut input = child.stdin.take().expect("piped stdin");
    let stdin = stdin.to_string();
    let writer = std::thread::spawn(move || {
        let _ = input.write_all(stdin.as_bytes());
    });
    let mut pipe = child.stdout.take().expect("piped stdout");
    let reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = pipe.read_to_end(&mut buf);
        buf
    });
    let status = child
        .wait_timeout(Duration::from_secs(spec.time_limit_secs))
        .map_err(|e| SandboxFailure::Infrastructure(e.to_string()))?;
    let status = match status {
        Some(s) => Some(s),
        None => {
            let _ = child.kill();
            let _ = child.wait();
            None
        }
    };
    let _ = writer.join();
    let stdout = reader.join().unwrap_or_default();
    Ok(RunResult { success: status.is_some_and(|s| s.success()), stdout })
}

/// Builds `code` as `file_name` in a fresh scratch directory and, when a
/// test is given, runs it and compares stdout (trailing whitespace ignored).
pub fn check_code(
    code: &str,
    file_name: &str,
    language: LanguageId,
    test: Option<&super::UnitTestSpec>,
    spec: &SandboxSpec,
) -> Result<Verdict, SandboxFailure> {
    spec.validate()?;
    let commands = spec.languages.get(&language).ok_or(SandboxFailure::NoCommands(language))?;
    let tmp = tempfile::Builder::new()
        .prefix("warp-sandbox-")
        .tempdir()
        .map_err(|e| SandboxFailure::Infrastructure(e.to_string()))?;
    let dir = tmp.path().to_path_buf();
    let cache = spec.cache();
    std::fs::create_dir_all(&cache).map_err(|e| SandboxFailure::Infrastructure(e.to_string()))?;
    let file = dir.join(Path::new(file_name).file_name().unwrap_or(file_name.as_ref()));
    std::fs::write(&file, code).map_err(|e| SandboxFailure::Infrastructure(e.to_string()))?;
    let scratch = Scratch { out: dir.join("prog"), file, dir, cache };
    if spec.keep_scratch {
        let kept = tmp.keep();
        log::info!("sandbox scratch kept at {}", kept.display());
    }

    // Interpreted languages "compile" by running, so they get the test input.
    let compiled = run(spec, &scratch, &commands.compile, test.map_or("", |t| t.stdin.as_str()))?.success;
    let semantically_correct = match test {
        Some(t) if compiled => {
            let r = run(spec, &scratch, &commands.run, &t.stdin)?;
            let out = String::from_utf8_lossy(&r.stdout);
            Some(r.success && out.trim_end() == t.expected_stdout.trim_end())
        }
        Some(_) => Some(false),
        None => None,
    };
    Ok(Verdict { compiled, semantically_correct })
}

/// Applies `solution.fix` to the instance's code and checks the result. A
/// fix that does not apply counts as not compiling.
pub fn compiles_correctly(
    instance: &BenchmarkInstance,
    solution: &FinalSolution,
    spec: &SandboxSpec,
) -> Result<Verdict, SandboxFailure> {
    match apply_diff(&instance.erroneous_code, &solution.fix) {
        Ok(patched) => check_code(&patched, &instance.file_name(), instance.language, instance.unit_tests.as_ref(), spec),
        Err(_) => Ok(Verdict { compiled: false, semantically_correct: instance.unit_tests.as_ref().map(|_| false) }),
    }
}
