use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::context::ProjectMetadata;
use crate::diagnostics::LanguageId;
use crate::diff::{apply_diff, parse_unified_diff, UnifiedDiff};
use crate::util::sha256_hex;

pub const MAX_VERIFIED_URLS: usize = 3;

/// A program run whose stdout decides semantic correctness.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitTestSpec {
    #[serde(default)]
    pub stdin: String,
    pub expected_stdout: String,
}

/// One benchmark case, stored as one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkInstance {
    pub id: String,
    pub language: LanguageId,
    pub erroneous_code: String,
    /// The compiler's or interpreter's output, verbatim.
    pub error_message: String,
    #[serde(default)]
    pub project_context: ProjectMetadata,
    /// Stored as unified diff text.
    #[serde(serialize_with = "diff_out", deserialize_with = "diff_in")]
    pub ground_truth_diff: UnifiedDiff,
    pub reference_explanation: String,
    #[serde(default)]
    pub verified_urls: Vec<String>,
    #[serde(default)]
    pub unit_tests: Option<UnitTestSpec>,
}

fn diff_out<S: Serializer>(d: &UnifiedDiff, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&d.to_string())
}

fn diff_in<'de, D: Deserializer<'de>>(d: D) -> Result<UnifiedDiff, D::Error> {
    let text = String::deserialize(d)?;
    parse_unified_diff(&text).map_err(serde::de::Error::custom)
}

impl BenchmarkInstance {
    /// File name the code is compiled under, taken from the ground-truth diff.
    pub fn file_name(&self) -> String {
        let name = self.ground_truth_diff.file_name();
        if !name.is_empty() {
            return name.to_string();
        }
        match self.language {
            LanguageId::C => "main.c",
            LanguageId::Cpp => "main.cpp",
            LanguageId::Python => "main.py",
            LanguageId::Go => "main.go",
        }
        .to_string()
    }

    /// The build command the error output was recorded from.
    pub fn build_command(&self) -> String {
        let file = self.file_name();
        match self.language {
            LanguageId::C => format!("gcc -c {file}"),
            LanguageId::Cpp => format!("g++ -c {file}"),
            LanguageId::Python => format!("python3 {file}"),
            LanguageId::Go => format!("go build {file}"),
        }
    }

    /// The code with the ground-truth fix applied.
    pub fn fixed_code(&self) -> String {
        apply_diff(&self.erroneous_code, &self.ground_truth_diff).expect("validated instance")
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty id".into());
        }
        if self.error_message.trim().is_empty() {
            return Err("empty error_message".into());
        }
        if self.verified_urls.len() > MAX_VERIFIED_URLS {
            return Err(format!("{} verified urls, at most {MAX_VERIFIED_URLS} allowed", self.verified_urls.len()));
        }
        if self.ground_truth_diff.is_identity() {
            return Err("ground-truth diff changes nothing".into());
        }
        apply_diff(&self.erroneous_code, &self.ground_truth_diff)
            .map(|_| ())
            .map_err(|e| format!("ground-truth diff does not apply: {e}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatasetError {
    #[error("cannot read dataset {path}: {reason}")]
    DatasetUnreadable { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationError {
    /// 1-based line in the dataset file.
    pub line: usize,
    pub id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub instances: Vec<BenchmarkInstance>,
    pub errors: Vec<ValidationError>,
    /// sha256 of the file bytes.
    pub hash: String,
}

/// Parses a line-delimited dataset. Invalid records are reported in
/// `errors` and skipped; blank lines are ignored.
pub fn load_benchmark(path: &Path) -> Result<Benchmark, DatasetError> {
    let bytes = fs::read(path)
        .map_err(|e| DatasetError::DatasetUnreadable { path: path.display().to_string(), reason: e.to_string() })?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|e| DatasetError::DatasetUnreadable { path: path.display().to_string(), reason: e.to_string() })?;
    let mut instances = Vec::new();
    let mut errors = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: BenchmarkInstance = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(|x| x.as_str()).map(String::from));
                errors.push(ValidationError { line: i + 1, id, reason: e.to_string() });
                continue;
            }
        };
        let verdict = record.validate().and_then(|_| {
            if ids.insert(record.id.clone()) { Ok(()) } else { Err("duplicate id".to_string()) }
        });
        match verdict {
            Ok(()) => instances.push(record),
            Err(reason) => errors.push(ValidationError { line: i + 1, id: Some(record.id), reason }),
        }
    }
    Ok(Benchmark { instances, errors, hash: sha256_hex(&bytes) })
}

/// Writes instances in the format [`load_benchmark`] reads.
pub fn write_benchmark(path: &Path, instances: &[BenchmarkInstance]) -> std::io::Result<()> {
    let mut out = String::new();
    for inst in instances {
        out.push_str(&serde_json::to_string(inst).expect("instance serializes"));
        out.push('\n');
    }
    fs::write(path, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instance() -> BenchmarkInstance {
        BenchmarkInstance {
            id: "c-1".into(),
            language: LanguageId::C,
            erroneous_code: "int main(void)\n{\n    return 0\n}\n".into(),
            error_message: "main.c:3:13: error: expected ';' before '}' token\n".into(),
            project_context: ProjectMetadata::default(),
            ground_truth_diff: parse_unified_diff("--- a/main.c\n+++ b/main.c\n@@ -3 +3 @@\n-    return 0\n+    return 0;\n").unwrap(),
            reference_explanation: "The return statement lacks a semicolon.".into(),
            verified_urls: vec!["https://en.cppreference.com/w/c/language/statements".into()],
            unit_tests: None,
        }
    }

    #[test]
    fn round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let good = instance();
        let mut bad = instance();
        bad.id = "c-2".into();
        bad.erroneous_code = "int main(void)\n{\n    return 1\n}\n".into();
        let mut many_urls = instance();
        many_urls.id = "c-3".into();
        many_urls.verified_urls = vec!["a".into(), "b".into(), "c".into(), "d".into()];
        write_benchmark(&path, &[good.clone(), bad, many_urls, good.clone()]).unwrap();
        let text = fs::read_to_string(&path).unwrap() + "\n{not json\n";
        fs::write(&path, text).unwrap();

        let b = load_benchmark(&path).unwrap();
        assert_eq!(b.instances, vec![good.clone()]);
        let reasons: Vec<_> = b.errors.iter().map(|e| (e.line, e.id.clone())).collect();
        assert_eq!(reasons, [(2, Some("c-2".into())), (3, Some("c-3".into())), (4, Some("c-1".into())), (6, None)]);
        assert!(b.errors[0].reason.contains("does not apply"));
        assert_eq!(good.file_name(), "main.c");
        assert_eq!(good.build_command(), "gcc -c main.c");
        assert_eq!(good.fixed_code(), "int main(void)\n{\n    return 0;\n}\n");
    }

    #[test]
    fn empty_and_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.jsonl");
        fs::write(&path, "").unwrap();
        assert!(load_benchmark(&path).unwrap().instances.is_empty());
        assert!(matches!(load_benchmark(&dir.path().join("nope")), Err(DatasetError::DatasetUnreadable { .. })));
    }
}
