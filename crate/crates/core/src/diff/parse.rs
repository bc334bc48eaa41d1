use std::sync::LazyLock;

use regex::Regex;

use super::{DiffError, Hunk, HunkLine, LineKind, UnifiedDiff};

static HUNK_HEADER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@(?: .*)?$").unwrap());

const NO_NEWLINE: &str = "\\ No newline at end of file";

fn syntax(line: usize, reason: impl Into<String>) -> DiffError {
    DiffError::DiffSyntaxError { line, reason: reason.into() }
}

/// `--- path\t2024-01-01 ...` → `path`.
fn header_path(rest: &str) -> String {
    rest.split('\t').next().unwrap_or(rest).trim_end().to_string()
}

fn count_mismatch(index: usize, h: &Hunk) -> DiffError {
    let ctx = h.count(LineKind::Context);
    DiffError::HunkCountMismatch {
        hunk_index: index,
        old_len: h.old_len,
        new_len: h.new_len,
        found_old: ctx + h.count(LineKind::Remove),
        found_new: ctx + h.count(LineKind::Add),
    }
}

/// Strictly parses single-file `diff -u` text.
///
/// `diff ` and `index ` preamble lines before the headers are skipped. Blank
/// lines inside a hunk count as empty context lines. Empty input is the
/// identity diff.
pub fn parse_unified_diff(text: &str) -> Result<UnifiedDiff, DiffError> {
    let lines: Vec<&str> = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
    let mut i = 0;
    while i < lines.len() && (lines[i].trim().is_empty() || lines[i].starts_with("diff ") || lines[i].starts_with("index ")) {
        i += 1;
    }
    if i == lines.len() {
        return Ok(UnifiedDiff::identity());
    }
    let old_path = lines[i].strip_prefix("--- ").ok_or_else(|| syntax(i + 1, "expected `--- ` header"))?;
    let new_path = lines
        .get(i + 1)
        .and_then(|l| l.strip_prefix("+++ "))
        .ok_or_else(|| syntax(i + 2, "expected `+++ ` header"))?;
    let mut diff = UnifiedDiff { old_path: header_path(old_path), new_path: header_path(new_path), hunks: Vec::new() };
    i += 2;

    while i < lines.len() {
        let line = lines[i];
        if line.trim().is_empty() && lines[i..].iter().all(|l| l.trim().is_empty()) {
            break;
        }
        if line.starts_with("--- ") {
            return Err(syntax(i + 1, "multi-file diffs are not supported"));
        }
        let caps = HUNK_HEADER.captures(line).ok_or_else(|| {
            if matches!(line.chars().next(), Some(' ' | '-' | '+')) && !diff.hunks.is_empty() {
                count_mismatch(diff.hunks.len() - 1, diff.hunks.last().unwrap())
            } else {
                syntax(i + 1, format!("expected hunk header, found {line:?}"))
            }
        })?;
        let num = |g: usize, default: u32| -> Result<u32, DiffError> {
            caps.get(g).map_or(Ok(default), |m| m.as_str().parse().map_err(|_| syntax(i + 1, "hunk range overflow")))
        };
        let mut hunk =
            Hunk { old_start: num(1, 0)?, old_len: num(2, 1)?, new_start: num(3, 0)?, new_len: num(4, 1)?, lines: Vec::new() };
        if (hunk.old_len > 0 && hunk.old_start == 0) || (hunk.new_len > 0 && hunk.new_start == 0) {
            return Err(syntax(i + 1, "non-empty range starting at line 0"));
        }
        let hunk_index = diff.hunks.len();
        i += 1;

        let (mut old_seen, mut new_seen) = (0u32, 0u32);
        while i < lines.len() && (old_seen < hunk.old_len || new_seen < hunk.new_len) {
            let body = lines[i];
            if body == NO_NEWLINE {
                let last = hunk.lines.last_mut().ok_or_else(|| syntax(i + 1, "newline marker before any line"))?;
                last.no_newline = true;
                i += 1;
                continue;
            }
            let (kind, rest) = match body.chars().next() {
                Some(' ') => (LineKind::Context, &body[1..]),
                Some('-') => (LineKind::Remove, &body[1..]),
                Some('+') => (LineKind::Add, &body[1..]),
                None => (LineKind::Context, ""),
                Some(_) if body.starts_with("@@") => break,
                Some(_) => return Err(syntax(i + 1, format!("unexpected hunk line {body:?}"))),
            };
            match kind {
                LineKind::Context => {
                    old_seen += 1;
                    new_seen += 1;
                }
                LineKind::Remove => old_seen += 1,
                LineKind::Add => new_seen += 1,
            }
            hunk.lines.push(HunkLine::new(kind, rest));
            i += 1;
        }
        if lines.get(i) == Some(&NO_NEWLINE) {
            if let Some(last) = hunk.lines.last_mut() {
                last.no_newline = true;
            }
            i += 1;
        }
        if !hunk.is_consistent() {
            return Err(count_mismatch(hunk_index, &hunk));
        }
        if let Some(prev) = diff.hunks.last() {
            if hunk.old_start < prev.old_start + prev.old_len.max(1) {
                return Err(syntax(i, "hunks overlap or are out of order"));
            }
        }
        diff.hunks.push(hunk);
    }
    Ok(diff)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_identity() {
        assert_eq!(parse_unified_diff("").unwrap(), UnifiedDiff::identity());
        assert_eq!(parse_unified_diff("\n  \n").unwrap(), UnifiedDiff::identity());
    }

    #[test]
    fn one_hunk_replacement() {
        let d = parse_unified_diff("--- a/main.c\n+++ b/main.c\n@@ -5 +5 @@\n-    x = 1\n+    x = 1;\n").unwrap();
        assert_eq!(d.hunks.len(), 1);
        let h = &d.hunks[0];
        assert_eq!((h.old_start, h.old_len, h.new_start, h.new_len), (5, 1, 5, 1));
        assert_eq!(d.file_name(), "main.c");
        assert_eq!(d.changed_lines(), 2);
    }

    #[test]
    fn short_hunk_is_count_mismatch() {
        let err = parse_unified_diff("--- a\n+++ b\n@@ -1,3 +1,3 @@\n a\n-b\n+c\n").unwrap_err();
        assert!(matches!(err, DiffError::HunkCountMismatch { hunk_index: 0, old_len: 3, found_old: 2, .. }));
    }

    #[test]
    fn long_hunk_is_count_mismatch() {
        let err = parse_unified_diff("--- a\n+++ b\n@@ -1 +1 @@\n-b\n+c\n+d\n").unwrap_err();
        assert!(matches!(err, DiffError::HunkCountMismatch { hunk_index: 0, .. }), "{err:?}");
    }

    #[test]
    fn syntax_errors_carry_line() {
        assert_eq!(
            parse_unified_diff("hello\n").unwrap_err(),
            DiffError::DiffSyntaxError { line: 1, reason: "expected `--- ` header".into() }
        );
        let err = parse_unified_diff("--- a\n+++ b\n@@ -x +1 @@\n").unwrap_err();
        assert!(matches!(err, DiffError::DiffSyntaxError { line: 3, .. }));
        let err = parse_unified_diff("--- a\n+++ b\n@@ -3 +3 @@\n-a\n+b\n@@ -1 +1 @@\n-c\n+d\n").unwrap_err();
        assert!(matches!(err, DiffError::DiffSyntaxError { .. }));
    }

    #[test]
    fn preamble_timestamps_and_marker() {
        let text = "diff --git a/x b/x\nindex 1..2 100644\n--- a/x\t2024-01-01 00:00:00\n+++ b/x\t2024-01-02\n@@ -1 +1 @@\n-a\n\\ No newline at end of file\n+a\n";
        let d = parse_unified_diff(text).unwrap();
        assert_eq!(d.old_path, "a/x");
        assert!(d.hunks[0].lines[0].no_newline);
        assert!(!d.hunks[0].lines[1].no_newline);
    }

    #[test]
    fn blank_line_is_empty_context() {
        let d = parse_unified_diff("--- a\n+++ b\n@@ -1,3 +1,3 @@\n a\n\n-b\n+c\n").unwrap();
        assert_eq!(d.hunks[0].lines[1], HunkLine::new(LineKind::Context, ""));
    }

    #[test]
    fn pure_insertion_at_top() {
        let d = parse_unified_diff("--- a\n+++ b\n@@ -0,0 +1,2 @@\n+x\n+y\n").unwrap();
        assert_eq!(d.hunks[0].old_start, 0);
        assert!(parse_unified_diff("--- a\n+++ b\n@@ -0 +1 @@\n-x\n+y\n").is_err());
    }

    #[test]
    fn display_round_trips() {
        let text = "--- a/m.c\n+++ b/m.c\n@@ -3,4 +3,4 @@\n {\n-    x = 1\n+    x = 1;\n     return 0;\n }\n\\ No newline at end of file\n";
        let d = parse_unified_diff(text).unwrap();
        assert_eq!(d.to_string(), text);
    }
}
