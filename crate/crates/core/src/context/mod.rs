//! Error context assembly: the code window around a diagnostic, the project's
//! declared dependencies and flags, and the combined [`ErrorContext`].

mod ast;
mod manifest;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{
    canonicalize, detect_language, tokenize_message, CanonicalErrorId, Diagnostic, LanguageId, RawCapture,
    UnknownLanguage,
};

/// Lines of source around an error location.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AstWindow {
    /// Exactly the source lines `line_range.0 ..= line_range.1`, joined by `\n`.
    pub snippet: String,
    pub line_range: (u32, u32),
    pub enclosing_symbol: Option<String>,
    /// Distinct syntax node kinds intersecting the window, in pre-order.
    pub node_kinds: Vec<String>,
    /// The parser gave up and the window is plain text, or it was cut to fit.
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dependency {
    pub name: String,
    /// As written in the manifest, e.g. `==2.31.0` or `v1.9.1`. May be empty.
    pub version_spec: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BuildTool {
    Make,
    CMake,
    GoMod,
    PipRequirements,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectMetadata {
    pub dependencies: Vec<Dependency>,
    pub compiler_flags: Vec<String>,
    pub build_tool: Option<BuildTool>,
    pub language_version: Option<String>,
}

impl ProjectMetadata {
    pub fn is_empty(&self) -> bool {
        self.dependencies.is_empty()
            && self.compiler_flags.is_empty()
            && self.build_tool.is_none()
            && self.language_version.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractionConfig {
    /// Half-width of the plain line window.
    pub k: u32,
    pub max_snippet_bytes: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig { k: 10, max_snippet_bytes: 4096 }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<(), ContextError> {
        if self.k < 1 {
            return Err(ContextError::InvalidConfig("k must be at least 1".into()));
        }
        if self.max_snippet_bytes < 256 {
            return Err(ContextError::InvalidConfig("max_snippet_bytes must be at least 256".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContextError {
    #[error("source file is empty")]
    EmptySource,
    #[error(transparent)]
    UnknownLanguage(#[from] UnknownLanguage),
    #[error("invalid extraction config: {0}")]
    InvalidConfig(String),
}

/// Everything the generators need to know about one compiler error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorContext {
    pub error_id: CanonicalErrorId,
    pub message_tokens: Vec<String>,
    pub raw_message: String,
    pub file_path: PathBuf,
    pub line: u32,
    pub language: LanguageId,
    pub ast_window: AstWindow,
    pub project_meta: ProjectMetadata,
    pub capture_ref: String,
}

/// Picks the code window around `line` (1-based, clamped to the file).
///
/// The enclosing function is used when it is no taller than the `±k` line
/// window and fits in `max_snippet_bytes`; otherwise the line window is used.
/// Sources the parser cannot make sense of fall back to the line window with
/// `degraded` set.
pub fn extract_ast_window(
    source: &str,
    line: u32,
    config: &ExtractionConfig,
    language: LanguageId,
) -> Result<AstWindow, ContextError> {
    ast::extract(source, line, config, language)
}

/// Reads the language's manifest under `project_root` and harvests flags
/// from `command_line`. A missing or unreadable manifest is not an error.
pub fn parse_project_metadata(project_root: &Path, language: LanguageId, command_line: &str) -> ProjectMetadata {
    manifest::parse(project_root, language, command_line)
}

/// Builds the full context for `diag`, reading project metadata from disk.
pub fn build_error_context(
    capture: &RawCapture,
    diag: &Diagnostic,
    source: &str,
    project_root: &Path,
    config: &ExtractionConfig,
) -> Result<ErrorContext, ContextError> {
    let language = detect_language(&diag.file_path, &capture.command_line)?;
    let meta = parse_project_metadata(project_root, language, &capture.command_line);
    assemble(capture, diag, source, language, meta, config)
}

/// Like [`build_error_context`] but with metadata supplied by the caller.
pub fn assemble_error_context(
    capture: &RawCapture,
    diag: &Diagnostic,
    source: &str,
    project_meta: ProjectMetadata,
    config: &ExtractionConfig,
) -> Result<ErrorContext, ContextError> {
    let language = detect_language(&diag.file_path, &capture.command_line)?;
    assemble(capture, diag, source, language, project_meta, config)
}

fn assemble(
    capture: &RawCapture,
    diag: &Diagnostic,
    source: &str,
    language: LanguageId,
    project_meta: ProjectMetadata,
    config: &ExtractionConfig,
) -> Result<ErrorContext, ContextError> {
    config.validate()?;
    let ast_window = extract_ast_window(source, diag.line.max(1), config, language)?;
    Ok(ErrorContext {
        error_id: canonicalize(diag, language),
        message_tokens: tokenize_message(&diag.message),
        raw_message: diag.message.clone(),
        file_path: diag.file_path.clone(),
        line: diag.line,
        language,
        ast_window,
        project_meta,
        capture_ref: capture.id(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const C_MAIN: &str = "#include <stdio.h>\nint x;\nint main(void)\n{\n    x = 1\n    return x > 0\n        ? 0\n        : 1;\n}\n";

    fn cfg() -> ExtractionConfig {
        ExtractionConfig::default()
    }

    #[test]
    fn short_file_clamps_to_whole_file() {
        let w = extract_ast_window("int a;\nint b;\nint c;\n", 1, &cfg(), LanguageId::C).unwrap();
        assert_eq!(w.line_range, (1, 3));
        assert_eq!(w.snippet, "int a;\nint b;\nint c;");
        assert!(!w.degraded);
    }

    #[test]
    fn line_past_end_clamps_to_last_line() {
        let w = extract_ast_window("a = 1\nb = 2\n", 40, &cfg(), LanguageId::Python).unwrap();
        assert_eq!(w.line_range, (1, 2));
    }

    #[test]
    fn enclosing_function_preferred() {
        let w = extract_ast_window(C_MAIN, 5, &cfg(), LanguageId::C).unwrap();
        assert_eq!(w.enclosing_symbol.as_deref(), Some("main"));
        assert_eq!(w.line_range, (3, 9));
        assert!(w.node_kinds.iter().any(|k| k == "function_definition"));
    }

    #[test]
    fn line_window_when_function_is_taller() {
        let body: String = (0..40).map(|i| format!("    x = {i};\n")).collect();
        let src = format!("int x;\nvoid f(void)\n{{\n{body}}}\n");
        let w = extract_ast_window(&src, 20, &ExtractionConfig { k: 3, ..cfg() }, LanguageId::C).unwrap();
        assert_eq!(w.line_range, (17, 23));
        assert_eq!(w.enclosing_symbol.as_deref(), Some("f"));
        assert!(!w.degraded);
    }

    #[test]
    fn python_and_go_symbols() {
        let py = "import os\n\nclass A:\n    def run(self):\n        return os.getcwd(\n\nprint(1)\n";
        let w = extract_ast_window(py, 5, &cfg(), LanguageId::Python).unwrap();
        assert_eq!(w.enclosing_symbol.as_deref(), Some("run"));

        let go = "package main\n\nimport \"fmt\"\n\nfunc main() {\n\tfmt.Printl(\"hi\")\n}\n";
        let w = extract_ast_window(go, 6, &cfg(), LanguageId::Go).unwrap();
        assert_eq!(w.enclosing_symbol.as_deref(), Some("main"));
        assert_eq!(w.line_range, (5, 7));
    }

    #[test]
    fn cpp_method_symbol() {
        let src = "struct S { int v; };\nint S_get(S &s) { return s.w; }\nnamespace n {\nint S2::value() const {\n  return v\n}\n}\n";
        let w = extract_ast_window(src, 5, &cfg(), LanguageId::Cpp).unwrap();
        assert_eq!(w.enclosing_symbol.as_deref(), Some("S2::value"));
    }

    #[test]
    fn shattered_source_degrades() {
        let garbage = "}}} ))) @@ ## $$ ;;; ((( ]]] ~~~ \n%% ^^ && || !! ?? ::: ,,, \n''' \"\"\" ``` \\\\ ";
        for lang in LanguageId::ALL {
            let w = extract_ast_window(garbage, 1, &cfg(), lang).unwrap();
            assert!(w.degraded, "{lang:?}");
            assert!(w.node_kinds.is_empty());
            assert_eq!(w.line_range, (1, 3));
        }
    }

    #[test]
    fn empty_source_rejected() {
        assert_eq!(extract_ast_window("", 1, &cfg(), LanguageId::C), Err(ContextError::EmptySource));
        assert_eq!(extract_ast_window(" \n\n", 1, &cfg(), LanguageId::Go), Err(ContextError::EmptySource));
    }

    #[test]
    fn oversized_window_truncated_around_line() {
        let src: String = (1..=21).map(|i| format!("x{i:02} = '{}'\n", "a".repeat(60))).collect();
        let w = extract_ast_window(&src, 11, &ExtractionConfig { k: 10, max_snippet_bytes: 256 }, LanguageId::Python)
            .unwrap();
        assert!(w.degraded);
        assert!(w.snippet.len() <= 256);
        let (s, e) = w.line_range;
        assert!(s <= 11 && 11 <= e);
        assert!((11 - s).abs_diff(e - 11) <= 1);
    }

    #[test]
    fn requirements_parsed_in_order() {
        let deps = manifest::requirements("# pinned\nrequests==2.31.0\nnumpy >= 1.24\nrich[jupyter]~=13.0 ; python_version>'3'\nflask\n-r other.txt\n");
        let got: Vec<_> = deps.iter().map(|d| (d.name.as_str(), d.version_spec.as_str())).collect();
        assert_eq!(got, [("requests", "==2.31.0"), ("numpy", ">=1.24"), ("rich", "~=13.0"), ("flask", "")]);
    }

    #[test]
    fn go_mod_single_and_block() {
        let (deps, v) = manifest::go_mod("module example.com/m\n\ngo 1.21\n\nrequire github.com/pkg/errors v0.9.1\n");
        assert_eq!(deps, [Dependency { name: "github.com/pkg/errors".into(), version_spec: "v0.9.1".into() }]);
        assert_eq!(v.as_deref(), Some("1.21"));
        let (deps, _) =
            manifest::go_mod("module m\nrequire (\n\ta.io/x v1.0.0 // indirect\n\tb.io/y v2.1.0\n)\n");
        assert_eq!(deps.len(), 2);
        assert_eq!(deps[1].name, "b.io/y");
    }

    #[test]
    fn flags_from_command_only_when_no_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let meta = parse_project_metadata(dir.path(), LanguageId::C, "gcc -O2 -Wall a.c");
        assert!(meta.dependencies.is_empty());
        assert_eq!(meta.compiler_flags, ["-O2", "-Wall"]);
        assert_eq!(meta.build_tool, None);
    }

    #[test]
    fn cmake_and_makefile() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("Makefile"), "CFLAGS=-std=c11\nLDLIBS=-lm -lpthread -lm\n").unwrap();
        let meta = parse_project_metadata(dir.path(), LanguageId::C, "make");
        assert_eq!(meta.build_tool, Some(BuildTool::Make));
        assert_eq!(meta.dependencies.iter().map(|d| d.name.as_str()).collect::<Vec<_>>(), ["m", "pthread"]);
        assert_eq!(meta.language_version.as_deref(), Some("c11"));

        std::fs::write(
            dir.path().join("CMakeLists.txt"),
            "set(CMAKE_CXX_STANDARD 17)\nfind_package(Boost 1.74 REQUIRED)\nfind_package(fmt)\n",
        )
        .unwrap();
        let meta = parse_project_metadata(dir.path(), LanguageId::Cpp, "cmake --build .");
        assert_eq!(meta.build_tool, Some(BuildTool::CMake));
        assert_eq!(meta.dependencies[0], Dependency { name: "Boost".into(), version_spec: "1.74".into() });
        assert_eq!(meta.language_version.as_deref(), Some("c++17"));
        assert_eq!(meta.compiler_flags, ["--build"]);
    }

    #[test]
    fn config_bounds() {
        assert!(ExtractionConfig { k: 0, max_snippet_bytes: 4096 }.validate().is_err());
        assert!(ExtractionConfig { k: 1, max_snippet_bytes: 255 }.validate().is_err());
        assert!(cfg().validate().is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn source() -> impl Strategy<Value = String> {
            prop::collection::vec("[ -~]{0,40}", 1..60).prop_map(|lines| lines.join("\n"))
        }

        proptest! {
            #[test]
            fn window_contains_line(src in source(), line in 1u32..80, k in 1u32..15, lang in 0usize..4) {
                prop_assume!(!src.trim().is_empty());
                let count = src.lines().count().max(1) as u32;
                let cfg = ExtractionConfig { k, max_snippet_bytes: 4096 };
                let w = extract_ast_window(&src, line, &cfg, LanguageId::ALL[lang]).unwrap();
                let clamped = line.min(count);
                prop_assert!(w.line_range.0 >= 1 && w.line_range.0 <= clamped && clamped <= w.line_range.1);
                let lines: Vec<&str> = src.lines().collect();
                prop_assert_eq!(&w.snippet, &lines[(w.line_range.0 - 1) as usize..w.line_range.1 as usize].join("\n"));
                prop_assert!(w.degraded || !w.node_kinds.is_empty());
                prop_assert!(w.snippet.len() <= 4096);
            }

            #[test]
            fn plain_window_monotone(line in 1u32..200, count in 1u32..200, k1 in 1u32..30, dk in 0u32..30) {
                let line = line.min(count);
                let (a1, b1) = ast::k_window(line, k1, count);
                let (a2, b2) = ast::k_window(line, k1 + dk, count);
                prop_assert!(a2 <= a1 && b1 <= b2);
            }
        }
    }
}
