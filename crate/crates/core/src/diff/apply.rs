use super::{DiffError, LineKind, UnifiedDiff};

/// Source lines without terminators, each flagged with whether it ended in `\n`.
pub(super) fn split_lines(source: &str) -> Vec<(&str, bool)> {
    source
        .split_inclusive('\n')
        .map(|l| match l.strip_suffix('\n') {
            Some(text) => (text, true),
            None => (l, false),
        })
        .collect()
}

fn join_lines(lines: &[(&str, bool)]) -> String {
    let mut out = String::with_capacity(lines.iter().map(|(t, _)| t.len() + 1).sum());
    for (i, (text, newline)) in lines.iter().enumerate() {
        out.push_str(text);
        // Only the final line may lack its terminator.
        if *newline || i + 1 < lines.len() {
            out.push('\n');
        }
    }
    out
}

/// Applies `diff` at exactly the positions its hunk headers state.
///
/// Every context and removed line must equal the source line (ignoring a
/// trailing `\r`). There is no offset search and no fuzz.
pub fn apply_diff(source: &str, diff: &UnifiedDiff) -> Result<String, DiffError> {
    if diff.hunks.is_empty() {
        return Ok(source.to_string());
    }
    let src = split_lines(source);
    let mut out: Vec<(&str, bool)> = Vec::with_capacity(src.len() + diff.changed_lines());
    let mut cursor = 0usize;
    for (hunk_index, hunk) in diff.hunks.iter().enumerate() {
        let start = if hunk.old_len == 0 { hunk.old_start } else { hunk.old_start - 1 } as usize;
        if start < cursor || start > src.len() {
            return Err(DiffError::ContextMismatch { hunk_index, line: start as u32 + 1 });
        }
        out.extend_from_slice(&src[cursor..start]);
        let mut pos = start;
        for line in &hunk.lines {
            match line.kind {
                LineKind::Context | LineKind::Remove => {
                    let matches = src.get(pos).is_some_and(|(text, _)| text.strip_suffix('\r').unwrap_or(text) == line.text);
                    if !matches {
                        return Err(DiffError::ContextMismatch { hunk_index, line: pos as u32 + 1 });
                    }
                    if line.kind == LineKind::Context {
                        let (text, newline) = src[pos];
                        out.push((text, newline && !line.no_newline));
                    }
                    pos += 1;
                }
                LineKind::Add => out.push((&line.text, !line.no_newline)),
            }
        }
        cursor = pos;
    }
    out.extend_from_slice(&src[cursor..]);
    Ok(join_lines(&out))
}

/// LF line endings, no trailing whitespace per line, no trailing blank lines.
pub fn normalize_output(text: &str) -> String {
    let lines: Vec<&str> = text.lines().map(str::trim_end).collect();
    let keep = lines.iter().rposition(|l| !l.is_empty()).map_or(0, |i| i + 1);
    lines[..keep].join("\n")
}

/// Whether both diffs apply to `source` and yield the same file up to line
/// endings and trailing whitespace.
pub fn diffs_equivalent(candidate: &UnifiedDiff, truth: &UnifiedDiff, source: &str) -> bool {
    match (apply_diff(source, candidate), apply_diff(source, truth)) {
        (Ok(a), Ok(b)) => normalize_output(&a) == normalize_output(&b),
        _ => false,
    }
}
