mod common;

use std::collections::BTreeMap;

use warp_core::diagnostics::{
    canonicalize, detect_error_signature, detect_language, parse_diagnostics, tokenize_message, CanonicalErrorId,
    Severity, Tool,
};

#[test]
fn every_labeled_diagnostic_is_recovered_exactly() {
    let corpus = common::diagnostics_corpus();
    let mut failures = Vec::new();
    for case in &corpus {
        let got = parse_diagnostics(&case.capture, None).diagnostics;
        if got.len() != case.expected.len()
            || !case.expected.iter().zip(&got).all(|(e, d)| e.matches(d))
        {
            failures.push(format!("{}: expected {:#?}\n got {:#?}", case.name, case.expected, got));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn corpus_covers_each_tool() {
    let mut per_tool: BTreeMap<String, usize> = BTreeMap::new();
    for case in common::diagnostics_corpus() {
        let tool = case.expected[0].tool;
        *per_tool.entry(format!("{tool:?}")).or_default() += 1;
    }
    for tool in [Tool::GccClang, Tool::PythonRuntime, Tool::GoBuild] {
        assert!(per_tool[&format!("{tool:?}")] >= 10, "{per_tool:?}");
    }
}

#[test]
fn spans_resolve_to_the_message() {
    for case in common::diagnostics_corpus() {
        for d in parse_diagnostics(&case.capture, None).diagnostics {
            let stream = case.capture.stream(d.stream);
            let raw = String::from_utf8_lossy(&stream[d.raw_span.clone()]);
            assert!(raw.contains(&d.message), "{}: {raw:?} lacks {:?}", case.name, d.message);
            assert!(d.line >= 1 && d.column.is_none_or(|c| c >= 1));
        }
    }
}

#[test]
fn parsing_is_deterministic() {
    for case in common::diagnostics_corpus() {
        assert_eq!(parse_diagnostics(&case.capture, None), parse_diagnostics(&case.capture, None));
    }
}

#[test]
fn canonicalization_is_total_over_corpus_errors() {
    let mut fallbacks = 0;
    let mut total = 0;
    for case in common::diagnostics_corpus() {
        for d in parse_diagnostics(&case.capture, None).diagnostics {
            if d.severity != Severity::Error {
                continue;
            }
            let lang = detect_language(&d.file_path, &case.capture.command_line).unwrap();
            let id = canonicalize(&d, lang);
            assert!(CanonicalErrorId::is_well_formed(&id.id), "{}", id.id);
            total += 1;
            if id.is_unclassified() {
                fallbacks += 1;
                eprintln!("fallback: {} {:?}", case.name, d.message);
            }
        }
    }
    eprintln!("canonicalized {total} errors, {fallbacks} fallbacks");
    assert!(total >= 30);
}

#[test]
fn every_case_fires_the_error_signature() {
    for case in common::diagnostics_corpus() {
        assert!(detect_error_signature(&case.capture).is_some(), "{}", case.name);
    }
}

#[test]
fn tokens_preserve_identifiers_in_corpus_messages() {
    let ident = regex::Regex::new(r"[A-Za-z_][A-Za-z0-9_]*").unwrap();
    for case in common::diagnostics_corpus() {
        for d in parse_diagnostics(&case.capture, None).diagnostics {
            let tokens = tokenize_message(&d.message);
            for m in ident.find_iter(&d.message) {
                assert!(
                    tokens.iter().any(|t| t.contains(m.as_str())),
                    "{}: {:?} lost in {tokens:?}",
                    case.name,
                    m.as_str()
                );
            }
        }
    }
}
