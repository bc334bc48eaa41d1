//! Build output capture and compiler diagnostic parsing.
//!
//! A [`RawCapture`] holds the verbatim output of one build command.
//! [`parse_diagnostics`] recognises gcc/clang, Python and Go output and yields
//! [`Diagnostic`]s in stream order; [`canonicalize`] maps an error diagnostic
//! onto the shipped taxonomy of [`CanonicalErrorId`]s.

mod capture;
mod language;
mod parse;
mod taxonomy;
mod tokenize;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::Range;
use std::path::PathBuf;

pub use capture::{capture_command, CaptureError};
pub use language::{detect_language, UnknownLanguage};
pub use parse::{parse_diagnostics, ParsedDiagnostics};
pub use taxonomy::{canonicalize, taxonomy_rules, CanonicalErrorId, TAXONOMY_VERSION};
pub use tokenize::tokenize_message;

/// The verbatim result of running one build command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCapture {
    pub command_line: String,
    /// Process exit code. Signal terminations are recorded as `128 + signal`.
    pub exit_code: i32,
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
    pub started_at: u64,
    pub finished_at: u64,
    pub working_dir: PathBuf,
    /// Set when the command was killed after exceeding its timeout.
    #[serde(default)]
    pub timed_out: bool,
}

impl RawCapture {
    /// A capture built from already-recorded streams, as in the fixture corpus.
    pub fn recorded(
        command_line: impl Into<String>,
        exit_code: i32,
        stdout: impl Into<Vec<u8>>,
        stderr: impl Into<Vec<u8>>,
    ) -> Self {
        RawCapture {
            command_line: command_line.into(),
            exit_code,
            stdout: stdout.into(),
            stderr: stderr.into(),
            started_at: 0,
            finished_at: 0,
            working_dir: PathBuf::from("."),
            timed_out: false,
        }
    }

    pub fn stream(&self, stream: Stream) -> &[u8] {
        match stream {
            Stream::Stdout => &self.stdout,
            Stream::Stderr => &self.stderr,
        }
    }

    pub fn stdout_text(&self) -> String {
        String::from_utf8_lossy(&self.stdout).into_owned()
    }

    pub fn stderr_text(&self) -> String {
        String::from_utf8_lossy(&self.stderr).into_owned()
    }

    /// Content identifier of this capture, used as `ErrorContext::capture_ref`.
    pub fn id(&self) -> String {
        let mut buf = Vec::with_capacity(self.stdout.len() + self.stderr.len() + 64);
        buf.extend_from_slice(self.command_line.as_bytes());
        buf.push(0);
        buf.extend_from_slice(&self.exit_code.to_le_bytes());
        buf.extend_from_slice(&self.started_at.to_le_bytes());
        buf.extend_from_slice(&self.stdout);
        buf.push(0);
        buf.extend_from_slice(&self.stderr);
        format!("cap-{}", crate::util::short_hash(&buf, 16))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stream {
    Stdout,
    Stderr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tool {
    GccClang,
    PythonRuntime,
    GoBuild,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Severity {
    Error,
    Warning,
    Note,
}

/// One compiler or interpreter diagnostic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub tool: Tool,
    pub severity: Severity,
    pub file_path: PathBuf,
    pub line: u32,
    /// `None` when the tool does not report a column (Python).
    pub column: Option<u32>,
    pub message: String,
    pub stream: Stream,
    /// Byte range of the originating line(s) within `stream`.
    pub raw_span: Range<usize>,
}

/// The language of the file being repaired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LanguageId {
    C,
    Cpp,
    Python,
    Go,
}

impl LanguageId {
    pub const ALL: [LanguageId; 4] = [LanguageId::C, LanguageId::Cpp, LanguageId::Python, LanguageId::Go];

    /// Human-readable name, as rendered into prompts.
    pub fn display_name(self) -> &'static str {
        match self {
            LanguageId::C => "C",
            LanguageId::Cpp => "C++",
            LanguageId::Python => "Python",
            LanguageId::Go => "Go",
        }
    }

    /// Lowercase word used in search queries.
    pub fn query_word(self) -> &'static str {
        match self {
            LanguageId::C => "c",
            LanguageId::Cpp => "c++",
            LanguageId::Python => "python",
            LanguageId::Go => "go",
        }
    }

    /// Prefix of canonical error ids for this language.
    pub fn id_prefix(self) -> &'static str {
        match self {
            LanguageId::C => "C",
            LanguageId::Cpp => "CPP",
            LanguageId::Python => "PY",
            LanguageId::Go => "GO",
        }
    }

    /// Whether diagnostics from `tool` can describe a file in this language.
    pub fn matches_tool(self, tool: Tool) -> bool {
        matches!(
            (self, tool),
            (LanguageId::C | LanguageId::Cpp, Tool::GccClang)
                | (LanguageId::Python, Tool::PythonRuntime)
                | (LanguageId::Go, Tool::GoBuild)
        )
    }
}

impl fmt::Display for LanguageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl std::str::FromStr for LanguageId {
    type Err = UnknownLanguage;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "c" => Ok(LanguageId::C),
            "cpp" | "c++" | "cxx" => Ok(LanguageId::Cpp),
            "python" | "py" => Ok(LanguageId::Python),
            "go" | "golang" => Ok(LanguageId::Go),
            _ => Err(UnknownLanguage { input: s.to_string() }),
        }
    }
}

/// The error signature rule: a capture triggers repair iff the command failed
/// and at least one error-severity diagnostic was parsed from it.
///
/// Returns the parsed diagnostics and the index of the first error.
pub fn detect_error_signature(capture: &RawCapture) -> Option<(ParsedDiagnostics, usize)> {
    if capture.exit_code == 0 {
        return None;
    }
    let parsed = parse_diagnostics(capture, None);
    let first = parsed
        .diagnostics
        .iter()
        .position(|d| d.severity == Severity::Error)?;
    Some((parsed, first))
}
