use std::ops::Range;
use std::path::PathBuf;
use std::sync::LazyLock;

use regex::bytes::Regex;

use super::{Diagnostic, RawCapture, Severity, Stream, Tool};

static GCC_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^(?P<file>[^\s:][^:]*?):(?P<line>\d+):(?:(?P<col>\d+):)? (?P<sev>fatal error|error|warning|note): (?P<msg>.*\S.*)$",
    )
    .unwrap()
});
static GO_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:vet: )?(?P<file>[^\s:][^:]*\.go):(?P<line>\d+)(?::(?P<col>\d+))?: (?P<msg>.*\S.*)$").unwrap()
});
static PY_WARNING: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?P<file>[^:]*\.py):(?P<line>\d+): (?P<msg>[A-Za-z_]\w*Warning: .*)$").unwrap()
});
static PY_TRACEBACK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^Traceback \(most recent call last\):\s*$").unwrap());
static PY_FRAME: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"^\s+File "(?P<file>[^"]+)", line (?P<line>\d+)(?:, in (?P<func>.+))?\s*$"#).unwrap()
});
static PY_EXCEPTION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[A-Za-z_][\w.]*(?::(?: .*)?)?$").unwrap());
static SUMMARY_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\d+ (?:error|warning)s?(?: and \d+ (?:error|warning)s?)? generated\.$").unwrap()
});
static EXCERPT_LINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*\d*\s*\|").unwrap());

/// Diagnostics found in a capture, plus the number of lines that looked like
/// diagnostics but could not be parsed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedDiagnostics {
    pub diagnostics: Vec<Diagnostic>,
    pub skipped: usize,
}

impl ParsedDiagnostics {
    pub fn first_error(&self) -> Option<&Diagnostic> {
        self.diagnostics.iter().find(|d| d.severity == Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Error)
    }
}

/// Parses every diagnostic in `capture`, stderr first, each stream in order.
///
/// With a `tool_hint` only that tool's formats are recognised.
pub fn parse_diagnostics(capture: &RawCapture, tool_hint: Option<Tool>) -> ParsedDiagnostics {
    let mut out = ParsedDiagnostics::default();
    for stream in [Stream::Stderr, Stream::Stdout] {
        StreamParser::new(stream, tool_hint, &mut out).run(capture.stream(stream));
    }
    out
}

struct Line<'a> {
    text: &'a [u8],
    span: Range<usize>,
}

fn split_lines(bytes: &[u8]) -> Vec<Line<'_>> {
    let mut lines = Vec::new();
    let mut start = 0;
    while start < bytes.len() {
        let end = bytes[start..]
            .iter()
            .position(|&b| b == b'\n')
            .map_or(bytes.len(), |p| start + p);
        let mut text_end = end;
        if text_end > start && bytes[text_end - 1] == b'\r' {
            text_end -= 1;
        }
        lines.push(Line { text: &bytes[start..text_end], span: start..text_end });
        start = end + 1;
    }
    lines
}

struct Frame {
    file: String,
    line: u32,
}

struct StreamParser<'o> {
    stream: Stream,
    hint: Option<Tool>,
    out: &'o mut ParsedDiagnostics,
}

impl<'o> StreamParser<'o> {
    fn new(stream: Stream, hint: Option<Tool>, out: &'o mut ParsedDiagnostics) -> Self {
        StreamParser { stream, hint, out }
    }

    fn allows(&self, tool: Tool) -> bool {
        self.hint.is_none_or(|h| h == tool)
    }

    fn run(&mut self, bytes: &[u8]) {
        let lines = split_lines(bytes);
        let mut i = 0;
        while i < lines.len() {
            if self.allows(Tool::PythonRuntime) {
                if let Some(next) = self.try_traceback(&lines, i) {
                    i = next;
                    continue;
                }
            }
            self.single_line(&lines[i]);
            i += 1;
        }
    }

    /// Recognises a traceback (or a bare `File "...", line N` block as printed
    /// for syntax errors) starting at `start`. Returns the index after it.
    fn try_traceback(&mut self, lines: &[Line<'_>], start: usize) -> Option<usize> {
        let first = &lines[start];
        let mut i = start;
        if PY_TRACEBACK.is_match(first.text) {
            i += 1;
        } else if !PY_FRAME.is_match(first.text) {
            return None;
        }
        let mut frames = Vec::new();
        while i < lines.len() {
            let line = &lines[i];
            if let Some(c) = PY_FRAME.captures(line.text) {
                frames.push(Frame {
                    file: lossy(&c["file"]),
                    line: parse_num(&c["line"]).unwrap_or(0),
                });
                i += 1;
                continue;
            }
            let indented = line.text.first().is_some_and(|b| b.is_ascii_whitespace());
            if indented {
                i += 1;
                continue;
            }
            if PY_EXCEPTION.is_match(line.text) && !frames.is_empty() {
                let frame = innermost_user_frame(&frames);
                if frame.line == 0 {
                    self.out.skipped += 1;
                    return Some(i + 1);
                }
                self.out.diagnostics.push(Diagnostic {
                    tool: Tool::PythonRuntime,
                    severity: Severity::Error,
                    file_path: PathBuf::from(&frame.file),
                    line: frame.line,
                    column: None,
                    message: lossy(line.text).trim_end().to_string(),
                    stream: self.stream,
                    raw_span: first.span.start..line.span.end,
                });
                return Some(i + 1);
            }
            break;
        }
        // Unterminated block: count it and resume from the offending line.
        self.out.skipped += 1;
        Some(i.max(start + 1))
    }

    fn single_line(&mut self, line: &Line<'_>) {
        if self.allows(Tool::GccClang) {
            if let Some(c) = GCC_LINE.captures(line.text) {
                let severity = match &c["sev"] {
                    b"note" => Severity::Note,
                    b"warning" => Severity::Warning,
                    _ => Severity::Error,
                };
                self.push(Tool::GccClang, severity, &c, line);
                return;
            }
        }
        if self.allows(Tool::GoBuild) {
            if let Some(c) = GO_LINE.captures(line.text) {
                self.push(Tool::GoBuild, Severity::Error, &c, line);
                return;
            }
        }
        if self.allows(Tool::PythonRuntime) {
            if let Some(c) = PY_WARNING.captures(line.text) {
                self.push(Tool::PythonRuntime, Severity::Warning, &c, line);
                return;
            }
        }
        if is_candidate(line.text) {
            self.out.skipped += 1;
        }
    }

    fn push(&mut self, tool: Tool, severity: Severity, c: &regex::bytes::Captures<'_>, line: &Line<'_>) {
        let Some(line_no) = parse_num(&c["line"]).filter(|&n| n >= 1) else {
            self.out.skipped += 1;
            return;
        };
        let column = c.name("col").and_then(|m| parse_num(m.as_bytes())).filter(|&n| n >= 1);
        self.out.diagnostics.push(Diagnostic {
            tool,
            severity,
            file_path: PathBuf::from(lossy(&c["file"])),
            line: line_no,
            column: if tool == Tool::PythonRuntime { None } else { column },
            message: lossy(&c["msg"]).trim_end().to_string(),
            stream: self.stream,
            raw_span: line.span.clone(),
        });
    }
}

fn innermost_user_frame(frames: &[Frame]) -> &Frame {
    frames
        .iter()
        .rev()
        .find(|f| !is_runtime_path(&f.file))
        .unwrap_or_else(|| frames.last().expect("non-empty frames"))
}

fn is_runtime_path(path: &str) -> bool {
    path.starts_with('<')
        || path.contains("/lib/python")
        || path.contains("site-packages")
        || path.contains("dist-packages")
        || path.contains("\\Lib\\")
}

fn is_candidate(text: &[u8]) -> bool {
    if SUMMARY_LINE.is_match(text) || EXCERPT_LINE.is_match(text) {
        return false;
    }
    let lower = text.to_ascii_lowercase();
    lower.windows(5).any(|w| w == b"error")
}

fn parse_num(bytes: &[u8]) -> Option<u32> {
    std::str::from_utf8(bytes).ok()?.parse().ok()
}

fn lossy(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(stderr: &str) -> ParsedDiagnostics {
        parse_diagnostics(&RawCapture::recorded("cmd", 1, "", stderr), None)
    }

    #[test]
    fn gcc_error_line() {
        let p = parse("main.c:5:10: error: expected ';' before 'return'\n");
        let d = &p.diagnostics[0];
        assert_eq!(d.tool, Tool::GccClang);
        assert_eq!(d.severity, Severity::Error);
        assert_eq!(d.file_path, PathBuf::from("main.c"));
        assert_eq!((d.line, d.column), (5, Some(10)));
        assert_eq!(d.message, "expected ';' before 'return'");
    }

    #[test]
    fn clean_build_is_empty() {
        let p = parse_diagnostics(&RawCapture::recorded("gcc a.c", 0, "", ""), None);
        assert!(p.diagnostics.is_empty());
        assert_eq!(p.skipped, 0);
    }

    #[test]
    fn go_line() {
        let p = parse("# command-line-arguments\n./main.go:7:2: undefined: fmt.Printl\n");
        let d = &p.diagnostics[0];
        assert_eq!(d.tool, Tool::GoBuild);
        assert_eq!(d.file_path, PathBuf::from("./main.go"));
        assert_eq!((d.line, d.column), (7, Some(2)));
        assert_eq!(d.message, "undefined: fmt.Printl");
    }

    #[test]
    fn traceback_collapses_to_innermost_user_frame() {
        let tb = "Traceback (most recent call last):\n  File \"app.py\", line 9, in <module>\n    run()\n  File \"app.py\", line 4, in run\n    json.loads(x)\n  File \"/usr/lib/python3.10/json/__init__.py\", line 346, in loads\n    return d(s)\nNameError: name 'x' is not defined\n";
        let p = parse(tb);
        assert_eq!(p.diagnostics.len(), 1);
        let d = &p.diagnostics[0];
        assert_eq!(d.line, 4);
        assert_eq!(d.column, None);
        assert_eq!(d.message, "NameError: name 'x' is not defined");
        assert_eq!(&tb.as_bytes()[d.raw_span.clone()][..9], b"Traceback");
    }

    #[test]
    fn unparseable_error_lines_are_counted() {
        let p = parse("collect2: error: ld returned 1 exit status\n1 error generated.\n");
        assert!(p.diagnostics.is_empty());
        assert_eq!(p.skipped, 1);
    }

    #[test]
    fn tool_hint_restricts_formats() {
        let cap = RawCapture::recorded("x", 1, "", "./main.go:1:2: undefined: y\n");
        assert!(parse_diagnostics(&cap, Some(Tool::GccClang)).diagnostics.is_empty());
        assert_eq!(parse_diagnostics(&cap, Some(Tool::GoBuild)).diagnostics.len(), 1);
    }

    #[test]
    fn crlf_is_tolerated() {
        let p = parse("a.c:1:2: error: boom\r\n");
        assert_eq!(p.diagnostics[0].message, "boom");
    }

    #[test]
    fn line_zero_is_rejected() {
        let p = parse("a.c:0:2: error: boom\n");
        assert!(p.diagnostics.is_empty());
        assert_eq!(p.skipped, 1);
    }
}
