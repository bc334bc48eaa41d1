use similar::{capture_diff_slices, group_diff_ops, Algorithm, DiffTag};

use super::apply::split_lines;
use super::{Hunk, HunkLine, LineKind, UnifiedDiff};

const CONTEXT: usize = 3;

fn line(kind: LineKind, (text, newline): (&str, bool)) -> HunkLine {
    HunkLine { kind, text: text.to_string(), no_newline: !newline }
}

fn start(index: usize, len: usize) -> u32 {
    if len == 0 { index as u32 } else { index as u32 + 1 }
}

/// Minimal line diff from `before` to `after` with three lines of context.
pub fn render_diff(before: &str, after: &str, path: &str) -> UnifiedDiff {
    let old = split_lines(before);
    let new = split_lines(after);
    let ops = capture_diff_slices(Algorithm::RawMyers, &old, &new);
    let hunks = group_diff_ops(ops, CONTEXT)
        .into_iter()
        .filter(|group| group.iter().any(|op| op.tag() != DiffTag::Equal))
        .map(|group| {
            let old_from = group[0].old_range().start;
            let new_from = group[0].new_range().start;
            let mut lines = Vec::new();
            for op in &group {
                let (tag, o, n) = op.as_tag_tuple();
                match tag {
                    DiffTag::Equal => lines.extend(o.map(|i| line(LineKind::Context, old[i]))),
                    DiffTag::Delete => lines.extend(o.map(|i| line(LineKind::Remove, old[i]))),
                    DiffTag::Insert => lines.extend(n.map(|i| line(LineKind::Add, new[i]))),
                    DiffTag::Replace => {
                        lines.extend(o.map(|i| line(LineKind::Remove, old[i])));
                        lines.extend(n.map(|i| line(LineKind::Add, new[i])));
                    }
                }
            }
            let old_len = group.iter().map(|op| op.old_range().len()).sum::<usize>();
            let new_len = group.iter().map(|op| op.new_range().len()).sum::<usize>();
            Hunk {
                old_start: start(old_from, old_len),
                old_len: old_len as u32,
                new_start: start(new_from, new_len),
                new_len: new_len as u32,
                lines,
            }
        })
        .collect::<Vec<_>>();
    if hunks.is_empty() {
        return UnifiedDiff::identity();
    }
    UnifiedDiff { old_path: format!("a/{path}"), new_path: format!("b/{path}"), hunks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::apply_diff;

    #[test]
    fn equal_inputs_give_identity() {
        assert!(render_diff("a\nb\n", "a\nb\n", "f").is_identity());
    }

    #[test]
    fn one_change_in_ten_lines() {
        let before: String = (1..=10).map(|i| format!("l{i}\n")).collect();
        let after = before.replace("l5\n", "l5;\n");
        let d = render_diff(&before, &after, "f.c");
        assert_eq!(d.hunks.len(), 1);
        let h = &d.hunks[0];
        assert_eq!((h.old_start, h.old_len, h.new_start, h.new_len), (2, 7, 2, 7));
        assert_eq!(h.lines.iter().take_while(|l| l.kind == LineKind::Context).count(), 3);
        assert_eq!(h.lines.iter().rev().take_while(|l| l.kind == LineKind::Context).count(), 3);
        assert_eq!(d.to_string(), "--- a/f.c\n+++ b/f.c\n@@ -2,7 +2,7 @@\n l2\n l3\n l4\n-l5\n+l5;\n l6\n l7\n l8\n");
    }

    #[test]
    fn missing_final_newline() {
        let d = render_diff("a\nb", "a\nb\n", "f");
        assert_eq!(d.to_string(), "--- a/f\n+++ b/f\n@@ -1,2 +1,2 @@\n a\n-b\n\\ No newline at end of file\n+b\n");
        assert_eq!(apply_diff("a\nb", &d).unwrap(), "a\nb\n");
        assert_eq!(apply_diff("a\nb\n", &d.invert()).unwrap(), "a\nb");
    }

    #[test]
    fn from_and_to_empty() {
        let d = render_diff("", "x\ny\n", "f");
        assert_eq!((d.hunks[0].old_start, d.hunks[0].old_len, d.hunks[0].new_start), (0, 0, 1));
        assert_eq!(apply_diff("", &d).unwrap(), "x\ny\n");
        let d = render_diff("x\ny\n", "", "f");
        assert_eq!(apply_diff("x\ny\n", &d).unwrap(), "");
    }

    #[test]
    fn distant_changes_split_hunks() {
        let before: String = (1..=30).map(|i| format!("{i}\n")).collect();
        let after = before.replace("\n3\n", "\nthree\n").replace("\n25\n", "\n");
        let d = render_diff(&before, &after, "f");
        assert_eq!(d.hunks.len(), 2);
        assert_eq!(apply_diff(&before, &d).unwrap(), after);
    }
}
