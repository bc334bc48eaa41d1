use std::collections::HashSet;

use tree_sitter::{Language, Node, Parser, Tree};

use super::{AstWindow, ContextError, ExtractionConfig};
use crate::diagnostics::LanguageId;

fn grammar(language: LanguageId) -> Language {
    match language {
        LanguageId::C => tree_sitter_c::LANGUAGE.into(),
        LanguageId::Cpp => tree_sitter_cpp::LANGUAGE.into(),
        LanguageId::Python => tree_sitter_python::LANGUAGE.into(),
        LanguageId::Go => tree_sitter_go::LANGUAGE.into(),
    }
}

fn is_function_kind(language: LanguageId, kind: &str) -> bool {
    match language {
        LanguageId::C | LanguageId::Cpp => kind == "function_definition",
        LanguageId::Python => kind == "function_definition",
        LanguageId::Go => matches!(kind, "function_declaration" | "method_declaration" | "func_literal"),
    }
}

/// Source split into lines without terminators; 1-based access via `line`.
pub(crate) struct SourceLines<'a> {
    lines: Vec<&'a str>,
    /// Byte offset of each line start.
    offsets: Vec<usize>,
}

impl<'a> SourceLines<'a> {
    pub(crate) fn new(source: &'a str) -> Self {
        let mut lines = Vec::new();
        let mut offsets = Vec::new();
        let mut start = 0;
        for (i, b) in source.bytes().enumerate() {
            if b == b'\n' {
                offsets.push(start);
                lines.push(source[start..i].strip_suffix('\r').unwrap_or(&source[start..i]));
                start = i + 1;
            }
        }
        if start < source.len() {
            offsets.push(start);
            lines.push(source[start..].strip_suffix('\r').unwrap_or(&source[start..]));
        }
        SourceLines { lines, offsets }
    }

    pub(crate) fn count(&self) -> u32 {
        self.lines.len() as u32
    }

    pub(crate) fn join(&self, start: u32, end: u32) -> String {
        self.lines[(start - 1) as usize..end as usize].join("\n")
    }

    fn byte_len(&self, start: u32, end: u32) -> usize {
        self.lines[(start - 1) as usize..end as usize].iter().map(|l| l.len() + 1).sum::<usize>() - 1
    }

    fn line_of_byte(&self, byte: usize) -> u32 {
        match self.offsets.binary_search(&byte) {
            Ok(i) => i as u32 + 1,
            Err(i) => i as u32,
        }
    }
}

/// The ±k window around `line`, clamped to the file.
pub(crate) fn k_window(line: u32, k: u32, count: u32) -> (u32, u32) {
    (line.saturating_sub(k).max(1), line.saturating_add(k).min(count))
}

/// Shrinks `[start, end]` one line at a time from whichever side is farther
/// from `line` until the snippet fits `max_bytes` or only `line` remains.
fn shrink_symmetric(src: &SourceLines<'_>, mut start: u32, mut end: u32, line: u32, max_bytes: usize) -> (u32, u32) {
    while src.byte_len(start, end) > max_bytes && (start < line || end > line) {
        if line - start >= end - line && start < line {
            start += 1;
        } else {
            end -= 1;
        }
    }
    (start, end)
}

pub(crate) fn extract(
    source: &str,
    line: u32,
    config: &ExtractionConfig,
    language: LanguageId,
) -> Result<AstWindow, ContextError> {
    if source.trim().is_empty() {
        return Err(ContextError::EmptySource);
    }
    let src = SourceLines::new(source);
    let count = src.count();
    let line = line.clamp(1, count);
    let (kw_start, kw_end) = k_window(line, config.k, count);

    let tree = parse(source, language).filter(|t| !mostly_errors(t, source));
    let Some(tree) = tree else {
        let (start, end) = shrink_symmetric(&src, kw_start, kw_end, line, config.max_snippet_bytes);
        return Ok(AstWindow {
            snippet: src.join(start, end),
            line_range: (start, end),
            enclosing_symbol: None,
            node_kinds: Vec::new(),
            degraded: true,
        });
    };

    let function = enclosing_function(tree.root_node(), line, language, &src);
    let enclosing_symbol = function.and_then(|f| function_name(f, source, language));
    let func_range = function.map(|f| {
        (src.line_of_byte(f.start_byte()).max(1), src.line_of_byte(f.end_byte().saturating_sub(1)).min(count))
    });

    let mut degraded = false;
    let (start, end) = match func_range {
        Some((fs, fe))
            if fs <= line
                && line <= fe
                && fe - fs <= kw_end - kw_start
                && src.byte_len(fs, fe) <= config.max_snippet_bytes =>
        {
            (fs, fe)
        }
        _ => {
            if src.byte_len(kw_start, kw_end) > config.max_snippet_bytes {
                degraded = true;
                shrink_symmetric(&src, kw_start, kw_end, line, config.max_snippet_bytes)
            } else {
                (kw_start, kw_end)
            }
        }
    };

    Ok(AstWindow {
        snippet: src.join(start, end),
        line_range: (start, end),
        enclosing_symbol,
        node_kinds: node_kinds(tree.root_node(), start, end, &src),
        degraded,
    })
}

fn parse(source: &str, language: LanguageId) -> Option<Tree> {
    let mut parser = Parser::new();
    parser.set_language(&grammar(language)).ok()?;
    parser.parse(source, None)
}

/// True when at least half of the non-whitespace bytes sit inside ERROR nodes.
fn mostly_errors(tree: &Tree, source: &str) -> bool {
    let root = tree.root_node();
    if root.is_error() {
        return true;
    }
    if !root.has_error() {
        return false;
    }
    let mut error_bytes = 0usize;
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        if node.is_error() {
            error_bytes += source[node.start_byte()..node.end_byte()]
                .bytes()
                .filter(|b| !b.is_ascii_whitespace())
                .count();
            continue;
        }
        if node.has_error() {
            let mut cursor = node.walk();
            stack.extend(node.children(&mut cursor));
        }
    }
    let total = source.bytes().filter(|b| !b.is_ascii_whitespace()).count().max(1);
    error_bytes * 2 >= total
}

fn node_lines(node: Node<'_>, src: &SourceLines<'_>) -> (u32, u32) {
    (
        src.line_of_byte(node.start_byte()).max(1),
        src.line_of_byte(node.end_byte().saturating_sub(1).max(node.start_byte())),
    )
}

fn enclosing_function<'t>(root: Node<'t>, line: u32, language: LanguageId, src: &SourceLines<'_>) -> Option<Node<'t>> {
    let mut best = None;
    let mut node = root;
    'descend: loop {
        let mut cursor = node.walk();
        for child in node.named_children(&mut cursor) {
            let (s, e) = node_lines(child, src);
            if s <= line && line <= e {
                if is_function_kind(language, child.kind()) {
                    best = Some(child);
                }
                node = child;
                continue 'descend;
            }
        }
        return best;
    }
}

fn function_name(func: Node<'_>, source: &str, language: LanguageId) -> Option<String> {
    let text = |n: Node<'_>| n.utf8_text(source.as_bytes()).ok().map(str::to_string);
    match language {
        LanguageId::Python | LanguageId::Go => func.child_by_field_name("name").and_then(text),
        LanguageId::C | LanguageId::Cpp => {
            let mut decl = func.child_by_field_name("declarator")?;
            loop {
                match decl.kind() {
                    "identifier" | "field_identifier" | "qualified_identifier" | "destructor_name"
                    | "operator_name" => return text(decl),
                    _ => decl = decl.child_by_field_name("declarator")?,
                }
            }
        }
    }
}

/// Distinct named node kinds intersecting `[start, end]`, in pre-order.
fn node_kinds(root: Node<'_>, start: u32, end: u32, src: &SourceLines<'_>) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut kinds = Vec::new();
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        let (s, e) = node_lines(node, src);
        if e < start || s > end {
            continue;
        }
        if node.is_named() && seen.insert(node.kind()) {
            kinds.push(node.kind().to_string());
        }
        let mut cursor = node.walk();
        let children: Vec<_> = node.named_children(&mut cursor).collect();
        stack.extend(children.into_iter().rev());
    }
    kinds
}
