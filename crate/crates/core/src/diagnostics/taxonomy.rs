use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{Diagnostic, LanguageId};

pub const TAXONOMY_VERSION: &str = "warp-taxonomy-1";

/// A standardized error type such as `C_SEMICOLON_EXPECTED`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CanonicalErrorId {
    pub id: String,
    pub taxonomy_version: String,
}

impl CanonicalErrorId {
    pub fn unclassified(language: LanguageId) -> Self {
        CanonicalErrorId {
            id: format!("{}_UNCLASSIFIED", language.id_prefix()),
            taxonomy_version: TAXONOMY_VERSION.to_string(),
        }
    }

    pub fn is_unclassified(&self) -> bool {
        self.id.ends_with("_UNCLASSIFIED")
    }

    /// The id without its language prefix, lowercased and space-separated:
    /// `C_SEMICOLON_EXPECTED` becomes `semicolon expected`.
    pub fn words(&self) -> String {
        let rest = self.id.split_once('_').map_or(self.id.as_str(), |(_, r)| r);
        rest.split('_').map(str::to_ascii_lowercase).collect::<Vec<_>>().join(" ")
    }

    pub fn is_well_formed(id: &str) -> bool {
        static FORM: LazyLock<Regex> =
            LazyLock::new(|| Regex::new(r"^[A-Z][A-Z0-9]*(_[A-Z0-9]+)+$").unwrap());
        FORM.is_match(id)
    }
}

impl fmt::Display for CanonicalErrorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Gcc,
    Python,
    Go,
}

impl Family {
    fn of(language: LanguageId) -> Family {
        match language {
            LanguageId::C | LanguageId::Cpp => Family::Gcc,
            LanguageId::Python => Family::Python,
            LanguageId::Go => Family::Go,
        }
    }
}

// Ordered: first match wins. The id suffix is joined to the language prefix,
// so gcc rules yield C_* or CPP_* depending on the file's language.
const GCC_RULES: &[(&str, &str)] = &[
    (r"expected ';'", "SEMICOLON_EXPECTED"),
    (r"expected '\)'", "PAREN_EXPECTED"),
    (r"expected '\}'", "BRACE_EXPECTED"),
    (r"expected '\]'", "BRACKET_EXPECTED"),
    (r"expected (identifier|declaration|expression|primary-expression|unqualified-id)", "EXPECTED_TOKEN"),
    (r"undeclared \(first use|use of undeclared identifier|was not declared in this scope", "UNDECLARED_IDENTIFIER"),
    (r"implicit declaration of function", "IMPLICIT_FUNCTION_DECLARATION"),
    (r"No such file or directory|file not found", "HEADER_NOT_FOUND"),
    (r"has no member named|no member named", "NO_MEMBER"),
    (r"too few arguments to function", "TOO_FEW_ARGUMENTS"),
    (r"too many arguments to function", "TOO_MANY_ARGUMENTS"),
    (r"no matching (member )?function for call", "NO_MATCHING_FUNCTION"),
    (r"conflicting types for", "CONFLICTING_TYPES"),
    (r"redefinition of|redeclaration of", "REDEFINITION"),
    (r"incompatible types|incompatible (integer|pointer) to|cannot convert|invalid conversion", "INCOMPATIBLE_TYPES"),
    (r"lvalue required|expression is not assignable", "LVALUE_REQUIRED"),
    (r"assignment of read-only|const-qualified", "ASSIGN_READ_ONLY"),
    (r"unknown type name|does not name a type", "UNKNOWN_TYPE"),
    (r"storage size of .* isn't known|incomplete type", "INCOMPLETE_TYPE"),
    (r"control reaches end of non-void|non-void function does not return", "MISSING_RETURN"),
    (r"undefined reference to", "UNDEFINED_REFERENCE"),
    (r"invalid operands to binary", "INVALID_OPERANDS"),
    (r"subscripted value is (neither|not)", "NOT_SUBSCRIPTABLE"),
    (r"called object .*is not a function", "NOT_CALLABLE"),
    (r"'break' statement not (within|in) loop|break statement not within", "BREAK_OUTSIDE_LOOP"),
    (r"stray '.*' in program", "STRAY_CHARACTER"),
    (r"missing terminating", "UNTERMINATED_LITERAL"),
    (r"abstract (class|type)", "ABSTRACT_INSTANTIATION"),
    (r"is private within this context|is a private member", "PRIVATE_MEMBER_ACCESS"),
];

const PYTHON_RULES: &[(&str, &str)] = &[
    (r"^SyntaxError: '[(\[{]' was never closed|^SyntaxError: unexpected EOF", "UNCLOSED_BRACKET"),
    (r"^SyntaxError: expected ':'", "COLON_EXPECTED"),
    (r"^SyntaxError: unterminated (triple-quoted )?string", "UNTERMINATED_STRING"),
    (r"^(IndentationError|TabError)|^SyntaxError: .*indent", "INDENTATION_ERROR"),
    (r"^SyntaxError: invalid syntax", "INVALID_SYNTAX"),
    (r"^SyntaxError", "SYNTAX_ERROR"),
    (r"^UnboundLocalError", "UNBOUND_LOCAL"),
    (r"^NameError", "NAME_ERROR"),
    (r"^ModuleNotFoundError", "MODULE_NOT_FOUND"),
    (r"^ImportError", "IMPORT_ERROR"),
    (r"^AttributeError: module ", "MODULE_ATTRIBUTE"),
    (r"^AttributeError: 'NoneType'", "NONE_ATTRIBUTE"),
    (r"^AttributeError", "ATTRIBUTE_ERROR"),
    (r"^TypeError: .*(concatenate|unsupported operand)", "OPERAND_TYPE"),
    (r"^TypeError: .*(positional argument|keyword argument|takes \d+)", "CALL_ARGUMENTS"),
    (r"^TypeError: .*not callable", "NOT_CALLABLE"),
    (r"^TypeError: .*not subscriptable", "NOT_SUBSCRIPTABLE"),
    (r"^TypeError: .*not iterable", "NOT_ITERABLE"),
    (r"^TypeError", "TYPE_ERROR"),
    (r"^KeyError", "KEY_ERROR"),
    (r"^IndexError", "INDEX_ERROR"),
    (r"JSONDecodeError", "JSON_DECODE"),
    (r"^ValueError", "VALUE_ERROR"),
    (r"^ZeroDivisionError", "ZERO_DIVISION"),
    (r"^(FileNotFoundError|IsADirectoryError|PermissionError)", "FILE_ERROR"),
    (r"^RecursionError", "RECURSION"),
    (r"^AssertionError", "ASSERTION"),
    (r"^RuntimeError", "RUNTIME_ERROR"),
];

const GO_RULES: &[(&str, &str)] = &[
    (r"has no field or method", "NO_FIELD_OR_METHOD"),
    (r"^undefined: ", "UNDEFINED"),
    (r"declared and not used", "UNUSED_VARIABLE"),
    (r"imported and not used", "UNUSED_IMPORT"),
    (r"^missing return", "MISSING_RETURN"),
    (r"^cannot use .* as .* value", "TYPE_MISMATCH"),
    (r"mismatched types", "MISMATCHED_TYPES"),
    (r"^assignment mismatch", "ASSIGNMENT_MISMATCH"),
    (r"^too many arguments in call", "TOO_MANY_ARGUMENTS"),
    (r"^not enough arguments in call", "NOT_ENOUGH_ARGUMENTS"),
    (r"non-boolean condition", "NON_BOOLEAN_CONDITION"),
    (r"^syntax error: unexpected newline in composite literal|possibly missing comma", "MISSING_COMMA"),
    (r"^syntax error", "SYNTAX_ERROR"),
    (r"no new variables on left side of :=", "NO_NEW_VARIABLES"),
    (r"redeclared in this block|already declared", "REDECLARED"),
    (r"^cannot assign to", "CANNOT_ASSIGN"),
    (r"does not implement", "INTERFACE_NOT_IMPLEMENTED"),
    (r"^invalid operation", "INVALID_OPERATION"),
    (r"is not a type", "NOT_A_TYPE"),
    (r"could not import|is not in (GOROOT|std)|no required module provides package|cannot find package", "IMPORT_NOT_FOUND"),
    (r"^missing function body", "MISSING_FUNCTION_BODY"),
    (r"^invalid recursive type", "RECURSIVE_TYPE"),
    (r"^cannot call non-function", "NOT_CALLABLE"),
    (r"^cannot range over", "CANNOT_RANGE"),
    (r"multiple-value .* in single-value context", "MULTI_VALUE_CONTEXT"),
    (r"is not used$", "UNUSED_RESULT"),
];

struct Rule {
    pattern: Regex,
    suffix: &'static str,
}

fn compile(rules: &[(&str, &'static str)]) -> Vec<Rule> {
    rules
        .iter()
        .map(|(p, s)| Rule { pattern: Regex::new(p).expect("taxonomy pattern"), suffix: s })
        .collect()
}

static GCC: LazyLock<Vec<Rule>> = LazyLock::new(|| compile(GCC_RULES));
static PYTHON: LazyLock<Vec<Rule>> = LazyLock::new(|| compile(PYTHON_RULES));
static GO: LazyLock<Vec<Rule>> = LazyLock::new(|| compile(GO_RULES));

fn rules_for(family: Family) -> &'static [Rule] {
    match family {
        Family::Gcc => &GCC,
        Family::Python => &PYTHON,
        Family::Go => &GO,
    }
}

/// The full id table for `language`, in rule order (fallback excluded).
pub fn taxonomy_rules(language: LanguageId) -> Vec<(String, String)> {
    let prefix = language.id_prefix();
    let table = match Family::of(language) {
        Family::Gcc => GCC_RULES,
        Family::Python => PYTHON_RULES,
        Family::Go => GO_RULES,
    };
    table.iter().map(|(p, s)| (p.to_string(), format!("{prefix}_{s}"))).collect()
}

/// Maps `diag` onto the taxonomy. Never fails: unmatched messages yield the
/// per-language `<LANG>_UNCLASSIFIED` id.
pub fn canonicalize(diag: &Diagnostic, language: LanguageId) -> CanonicalErrorId {
    let message = normalize_quotes(&diag.message);
    rules_for(Family::of(language))
        .iter()
        .find(|r| r.pattern.is_match(&message))
        .map(|r| CanonicalErrorId {
            id: format!("{}_{}", language.id_prefix(), r.suffix),
            taxonomy_version: TAXONOMY_VERSION.to_string(),
        })
        .unwrap_or_else(|| CanonicalErrorId::unclassified(language))
}

fn normalize_quotes(message: &str) -> String {
    message.replace(['\u{2018}', '\u{2019}'], "'").replace(['\u{201c}', '\u{201d}'], "\"")
}

#[cfg(test)]
mod tests {
    use std::path::PathBuf;

    use super::*;
    use crate::diagnostics::{Severity, Stream, Tool};

    fn diag(tool: Tool, message: &str) -> Diagnostic {
        Diagnostic {
            tool,
            severity: Severity::Error,
            file_path: PathBuf::from("x"),
            line: 1,
            column: None,
            message: message.to_string(),
            stream: Stream::Stderr,
            raw_span: 0..0,
        }
    }

    #[test]
    fn semicolon_example() {
        let id = canonicalize(&diag(Tool::GccClang, "expected ';' before 'return'"), LanguageId::C);
        assert_eq!(id.id, "C_SEMICOLON_EXPECTED");
        assert_eq!(id.words(), "semicolon expected");
    }

    #[test]
    fn curly_quotes_match_ascii_rules() {
        let id = canonicalize(&diag(Tool::GccClang, "expected \u{2018};\u{2019} before \u{2018}}\u{2019} token"), LanguageId::Cpp);
        assert_eq!(id.id, "CPP_SEMICOLON_EXPECTED");
    }

    #[test]
    fn fallback_for_unknown_message() {
        let id = canonicalize(&diag(Tool::GoBuild, "zzz nonsense zzz"), LanguageId::Go);
        assert_eq!(id.id, "GO_UNCLASSIFIED");
        assert!(id.is_unclassified());
    }

    #[test]
    fn python_name_error() {
        let id = canonicalize(&diag(Tool::PythonRuntime, "NameError: name 'x' is not defined"), LanguageId::Python);
        assert_eq!(id.id, "PY_NAME_ERROR");
    }

    #[test]
    fn first_matching_rule_wins() {
        // A JSON decode error is also a ValueError; the more specific rule is listed first.
        let id = canonicalize(
            &diag(Tool::PythonRuntime, "json.decoder.JSONDecodeError: Expecting value: line 1 column 1 (char 0)"),
            LanguageId::Python,
        );
        assert_eq!(id.id, "PY_JSON_DECODE");
    }

    #[test]
    fn every_table_id_is_well_formed() {
        for lang in LanguageId::ALL {
            let rules = taxonomy_rules(lang);
            assert!(rules.len() >= 25, "{lang:?} has {} rules", rules.len());
            for (_, id) in rules {
                assert!(CanonicalErrorId::is_well_formed(&id), "{id}");
            }
            assert!(CanonicalErrorId::is_well_formed(&CanonicalErrorId::unclassified(lang).id));
        }
    }
}
