//! Unified diffs: strict parsing, exact application, rendering, inversion
//! and output-level equivalence.

mod apply;
mod parse;
mod render;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use apply::{apply_diff, diffs_equivalent, normalize_output};
pub use parse::parse_unified_diff;
pub use render::render_diff;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LineKind {
    Context,
    Remove,
    Add,
}

impl LineKind {
    fn prefix(self) -> char {
        match self {
            LineKind::Context => ' ',
            LineKind::Remove => '-',
            LineKind::Add => '+',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HunkLine {
    pub kind: LineKind,
    pub text: String,
    /// Followed by `\ No newline at end of file`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub no_newline: bool,
}

impl HunkLine {
    pub fn new(kind: LineKind, text: impl Into<String>) -> Self {
        HunkLine { kind, text: text.into(), no_newline: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hunk {
    /// 1-based; for a pure insertion this is the line after which text goes.
    pub old_start: u32,
    pub old_len: u32,
    pub new_start: u32,
    pub new_len: u32,
    pub lines: Vec<HunkLine>,
}

impl Hunk {
    fn count(&self, kind: LineKind) -> u32 {
        self.lines.iter().filter(|l| l.kind == kind).count() as u32
    }

    pub fn is_consistent(&self) -> bool {
        let ctx = self.count(LineKind::Context);
        ctx + self.count(LineKind::Remove) == self.old_len && ctx + self.count(LineKind::Add) == self.new_len
    }
}

/// A single-file unified diff. No hunks means the identity change.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UnifiedDiff {
    pub old_path: String,
    pub new_path: String,
    pub hunks: Vec<Hunk>,
}

impl UnifiedDiff {
    pub fn identity() -> Self {
        UnifiedDiff::default()
    }

    pub fn is_identity(&self) -> bool {
        self.hunks.is_empty()
    }

    /// Added plus removed lines.
    pub fn changed_lines(&self) -> usize {
        self.hunks.iter().flat_map(|h| &h.lines).filter(|l| l.kind != LineKind::Context).count()
    }

    /// The target path with any `a/` or `b/` prefix removed.
    pub fn file_name(&self) -> &str {
        let path = if self.old_path.is_empty() || self.old_path == "/dev/null" { &self.new_path } else { &self.old_path };
        path.strip_prefix("a/").or_else(|| path.strip_prefix("b/")).unwrap_or(path)
    }

    /// The diff that undoes this one.
    pub fn invert(&self) -> UnifiedDiff {
        let hunks = self
            .hunks
            .iter()
            .map(|h| {
                let mut lines = Vec::with_capacity(h.lines.len());
                let mut pending_add = Vec::new();
                for line in &h.lines {
                    let kind = match line.kind {
                        LineKind::Context => LineKind::Context,
                        LineKind::Remove => LineKind::Add,
                        LineKind::Add => LineKind::Remove,
                    };
                    let swapped = HunkLine { kind, ..line.clone() };
                    match kind {
                        LineKind::Add => pending_add.push(swapped),
                        LineKind::Remove => lines.push(swapped),
                        LineKind::Context => {
                            lines.append(&mut pending_add);
                            lines.push(swapped);
                        }
                    }
                }
                lines.append(&mut pending_add);
                Hunk { old_start: h.new_start, old_len: h.new_len, new_start: h.old_start, new_len: h.old_len, lines }
            })
            .collect();
        UnifiedDiff { old_path: self.new_path.clone(), new_path: self.old_path.clone(), hunks }
    }
}

fn write_range(f: &mut fmt::Formatter<'_>, start: u32, len: u32) -> fmt::Result {
    if len == 1 {
        write!(f, "{start}")
    } else {
        write!(f, "{start},{len}")
    }
}

/// Renders `diff -u` text. The identity diff without paths renders empty.
impl fmt::Display for UnifiedDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.hunks.is_empty() && self.old_path.is_empty() && self.new_path.is_empty() {
            return Ok(());
        }
        writeln!(f, "--- {}", self.old_path)?;
        writeln!(f, "+++ {}", self.new_path)?;
        for h in &self.hunks {
            write!(f, "@@ -")?;
            write_range(f, h.old_start, h.old_len)?;
            write!(f, " +")?;
            write_range(f, h.new_start, h.new_len)?;
            writeln!(f, " @@")?;
            for line in &h.lines {
                writeln!(f, "{}{}", line.kind.prefix(), line.text)?;
                if line.no_newline {
                    writeln!(f, "\\ No newline at end of file")?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffError {
    #[error("diff syntax error at line {line}: {reason}")]
    DiffSyntaxError { line: usize, reason: String },
    #[error("hunk {hunk_index} header promises -{old_len} +{new_len} lines but the body has -{found_old} +{found_new}")]
    HunkCountMismatch { hunk_index: usize, old_len: u32, new_len: u32, found_old: u32, found_new: u32 },
    #[error("hunk {hunk_index} does not match the source at line {line}")]
    ContextMismatch { hunk_index: usize, line: u32 },
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SOURCE: &str = "int main(void)\n{\n    int x;\n    x = 1\n    return x;\n}\n";

    fn fix() -> UnifiedDiff {
        parse_unified_diff("--- a/m.c\n+++ b/m.c\n@@ -4 +4 @@\n-    x = 1\n+    x = 1;\n").unwrap()
    }

    #[test]
    fn identity_leaves_source() {
        assert_eq!(apply_diff(SOURCE, &UnifiedDiff::identity()).unwrap(), SOURCE);
    }

    #[test]
    fn exact_context_required() {
        assert_eq!(apply_diff(SOURCE, &fix()).unwrap(), SOURCE.replace("x = 1\n", "x = 1;\n"));
        let stale = parse_unified_diff("--- a\n+++ b\n@@ -3,2 +3,2 @@\n     int y;\n-    x = 1\n+    x = 1;\n").unwrap();
        assert_eq!(apply_diff(SOURCE, &stale), Err(DiffError::ContextMismatch { hunk_index: 0, line: 3 }));
        let shifted = parse_unified_diff("--- a\n+++ b\n@@ -5 +5 @@\n-    x = 1\n+    x = 1;\n").unwrap();
        assert_eq!(apply_diff(SOURCE, &shifted), Err(DiffError::ContextMismatch { hunk_index: 0, line: 5 }));
        let past_end = parse_unified_diff("--- a\n+++ b\n@@ -9 +9 @@\n-a\n+b\n").unwrap();
        assert!(matches!(apply_diff(SOURCE, &past_end), Err(DiffError::ContextMismatch { .. })));
    }

    #[test]
    fn equivalence_is_output_level() {
        let other = parse_unified_diff(
            "--- m.c\n+++ m.c\n@@ -3,3 +3,3 @@\n     int x;\n-    x = 1\n+    x = 1;   \n     return x;\n",
        )
        .unwrap();
        assert!(diffs_equivalent(&fix(), &fix(), SOURCE));
        assert!(diffs_equivalent(&fix(), &other, SOURCE));
        assert!(diffs_equivalent(&other, &fix(), SOURCE));
        let bad = parse_unified_diff("--- a\n+++ b\n@@ -1 +1 @@\n-nope\n+x\n").unwrap();
        assert!(!diffs_equivalent(&bad, &bad, SOURCE));
        assert!(!diffs_equivalent(&UnifiedDiff::identity(), &fix(), SOURCE));
    }

    #[test]
    fn crlf_source_matches() {
        let crlf = SOURCE.replace('\n', "\r\n");
        let out = apply_diff(&crlf, &fix()).unwrap();
        assert!(diffs_equivalent(&fix(), &fix(), &crlf));
        assert_eq!(normalize_output(&out), normalize_output(&SOURCE.replace("x = 1\n", "x = 1;\n")));
    }

    #[test]
    fn context_without_marker_before_added_tail() {
        let d = parse_unified_diff("--- a\n+++ b\n@@ -2 +2,2 @@\n b\n+c\n").unwrap();
        assert_eq!(apply_diff("a\nb", &d).unwrap(), "a\nb\nc\n");
    }

    fn edit_pair() -> impl Strategy<Value = (String, String)> {
        let line = prop::sample::select(vec!["a", "b", "c", "d", "", "  x", "}"]);
        (prop::collection::vec(line.clone(), 0..25), prop::collection::vec(line, 0..25), any::<bool>(), any::<bool>())
            .prop_map(|(a, b, ea, eb)| {
                let join = |v: Vec<&str>, eol: bool| {
                    let mut s = v.join("\n");
                    if eol && !s.is_empty() {
                        s.push('\n');
                    }
                    s
                };
                (join(a, ea), join(b, eb))
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]

        #[test]
        fn round_trip_and_inverse((before, after) in edit_pair()) {
            let d = render_diff(&before, &after, "f");
            prop_assert_eq!(&apply_diff(&before, &d).unwrap(), &after);
            prop_assert_eq!(&apply_diff(&after, &d.invert()).unwrap(), &before);
            prop_assert_eq!(&parse_unified_diff(&d.to_string()).unwrap(), &d);
            prop_assert!(d.hunks.iter().all(Hunk::is_consistent));
        }
    }
}
