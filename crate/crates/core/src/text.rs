//! Shared lexical helpers: stopwords, term extraction and word n-grams.

use std::collections::HashSet;
use std::sync::LazyLock;

const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "all", "also", "am", "an", "and", "any", "are", "as", "at",
    "be", "because", "been", "before", "being", "below", "between", "both", "but", "by", "can", "could",
    "did", "do", "does", "doing", "down", "during", "each", "either", "else", "few", "for", "from",
    "further", "had", "has", "have", "having", "he", "her", "here", "hers", "him", "his", "how", "i",
    "if", "in", "into", "is", "it", "its", "itself", "just", "let", "like", "may", "me", "might", "more",
    "most", "must", "my", "no", "nor", "not", "now", "of", "off", "on", "once", "one", "only", "or",
    "other", "our", "out", "over", "own", "same", "she", "should", "since", "so", "some", "such",
    "than", "that", "the", "their", "them", "then", "there", "these", "they", "this", "those",
    "through", "to", "too", "under", "until", "up", "us", "use", "used", "using", "very", "was", "we",
    "were", "what", "when", "where", "which", "while", "who", "why", "will", "with", "would", "you",
    "your",
];

// Ranked by how common the word is in compiler messages and explanations,
// most common first. Words absent from the list count as rarest.
const COMMON_WORDS: &[&str] = &[
    "error", "line", "code", "file", "function", "variable", "type", "value", "missing", "the",
    "statement", "expected", "declared", "defined", "name", "call", "return", "because", "fix",
    "add", "change", "should", "need", "needs", "instead", "cause", "root", "caused", "compiler",
    "before", "after", "argument", "arguments", "string", "int", "number", "list", "object",
    "module", "package", "import", "must", "correct", "wrong", "program", "make", "makes", "used",
    "uses", "unused", "end", "right", "left", "first", "second", "two", "new", "old", "not",
    "no", "valid", "invalid", "problem", "issue", "reason", "happens", "occurs", "here",
    "which", "method", "field", "member", "class", "struct", "pointer", "array", "index", "key",
    "token", "syntax", "symbol", "identifier", "expression", "operator", "parameter",
];

static STOPWORD_SET: LazyLock<HashSet<&'static str>> = LazyLock::new(|| STOPWORDS.iter().copied().collect());

pub(crate) fn is_stopword(word: &str) -> bool {
    STOPWORD_SET.contains(word.to_ascii_lowercase().as_str())
}

/// Frequency rank of `word` (0 = most common); `None` for words not listed.
pub(crate) fn frequency_rank(word: &str) -> Option<usize> {
    let lower = word.to_ascii_lowercase();
    COMMON_WORDS.iter().position(|w| *w == lower)
}

/// Lowercased alphanumeric terms with stopwords and single characters removed.
pub(crate) fn terms(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .filter(|t| !is_stopword(t))
        .collect()
}

/// Identifiers in a code snippet, lowercased.
pub(crate) fn identifiers(code: &str) -> Vec<String> {
    code.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|t| t.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_'))
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .filter(|t| !is_stopword(t) && !is_keyword(t))
        .collect()
}

const KEYWORDS: &[&str] = &[
    "auto", "break", "case", "char", "const", "continue", "default", "def", "defer", "double", "elif",
    "enum", "extern", "false", "float", "func", "go", "goto", "import", "include", "int", "lambda",
    "long", "none", "nil", "pass", "range", "return", "self", "short", "signed", "sizeof", "static",
    "struct", "switch", "true", "typedef", "union", "unsigned", "var", "void", "volatile",
];

fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

/// Lowercased whitespace-separated words.
pub(crate) fn words(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

/// Word `n`-grams; texts shorter than `n` words yield one gram of all words.
pub(crate) fn word_ngrams(text: &str, n: usize) -> HashSet<Vec<String>> {
    let w = words(text);
    if w.is_empty() {
        return HashSet::new();
    }
    if w.len() < n {
        return std::iter::once(w).collect();
    }
    w.windows(n).map(|g| g.to_vec()).collect()
}

/// Jaccard similarity of two gram sets; two empty sets are identical.
pub(crate) fn jaccard<T: std::hash::Hash + Eq>(a: &HashSet<T>, b: &HashSet<T>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}
