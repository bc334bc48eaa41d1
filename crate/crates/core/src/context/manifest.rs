use std::fs;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;

use super::{BuildTool, Dependency, ProjectMetadata};
use crate::diagnostics::LanguageId;

static REQUIREMENT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([A-Za-z0-9][A-Za-z0-9._-]*)(\[[^\]]*\])?\s*(.*)$").unwrap());
static FIND_PACKAGE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)find_package\(\s*([A-Za-z0-9_+-]+)(?:\s+([0-9][0-9.]*))?").unwrap());
static CMAKE_STANDARD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"set\(\s*CMAKE_(C|CXX)_STANDARD\s+([0-9]+)\s*\)").unwrap());
static STD_FLAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"-std=([A-Za-z0-9+]+)").unwrap());
static LIB_FLAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?:^|[\s=])-l([A-Za-z0-9_+-]+)").unwrap());

pub(crate) fn parse(project_root: &Path, language: LanguageId, command_line: &str) -> ProjectMetadata {
    let mut meta = ProjectMetadata {
        compiler_flags: compiler_flags(command_line),
        ..ProjectMetadata::default()
    };
    let read = |name: &str| fs::read_to_string(project_root.join(name)).ok();
    match language {
        LanguageId::Python => {
            if let Some(text) = read("requirements.txt") {
                meta.build_tool = Some(BuildTool::PipRequirements);
                meta.dependencies = requirements(&text);
            }
        }
        LanguageId::Go => {
            if let Some(text) = read("go.mod") {
                meta.build_tool = Some(BuildTool::GoMod);
                let (deps, version) = go_mod(&text);
                meta.dependencies = deps;
                meta.language_version = version;
            }
        }
        LanguageId::C | LanguageId::Cpp => {
            if let Some(text) = read("CMakeLists.txt") {
                meta.build_tool = Some(BuildTool::CMake);
                let (deps, version) = cmake(&text, language);
                meta.dependencies = deps;
                meta.language_version = version;
            } else if let Some(text) = read("Makefile") {
                meta.build_tool = Some(BuildTool::Make);
                let (deps, version) = makefile(&text);
                meta.dependencies = deps;
                meta.language_version = version;
            }
        }
    }
    if meta.language_version.is_none() {
        meta.language_version = STD_FLAG.captures(command_line).map(|c| c[1].to_string());
    }
    meta
}

fn compiler_flags(command_line: &str) -> Vec<String> {
    let argv = shlex::split(command_line).unwrap_or_else(|| command_line.split_whitespace().map(String::from).collect());
    argv.into_iter().skip(1).filter(|t| t.starts_with('-') && t.len() > 1).collect()
}

fn strip_comment<'a>(line: &'a str, marker: &str) -> &'a str {
    line.split_once(marker).map_or(line, |(before, _)| before).trim()
}

pub(crate) fn requirements(text: &str) -> Vec<Dependency> {
    text.lines()
        .map(|l| strip_comment(l, " #"))
        .filter(|l| !l.is_empty() && !l.starts_with('#') && !l.starts_with('-'))
        .filter_map(|l| {
            let l = l.split(';').next().unwrap_or(l).trim();
            let caps = REQUIREMENT.captures(l)?;
            Some(Dependency { name: caps[1].to_string(), version_spec: caps[3].replace(' ', "") })
        })
        .collect()
}

pub(crate) fn go_mod(text: &str) -> (Vec<Dependency>, Option<String>) {
    let mut deps = Vec::new();
    let mut version = None;
    let mut in_block = false;
    for line in text.lines() {
        let line = strip_comment(line, "//");
        if in_block {
            if line == ")" {
                in_block = false;
            } else if let Some(dep) = go_requirement(line) {
                deps.push(dep);
            }
        } else if let Some(rest) = line.strip_prefix("require") {
            let rest = rest.trim();
            if rest == "(" {
                in_block = true;
            } else if let Some(dep) = go_requirement(rest) {
                deps.push(dep);
            }
        } else if let Some(rest) = line.strip_prefix("go ") {
            version = Some(rest.trim().to_string());
        }
    }
    (deps, version)
}

fn go_requirement(entry: &str) -> Option<Dependency> {
    let mut parts = entry.split_whitespace();
    let name = parts.next()?;
    let version = parts.next()?;
    Some(Dependency { name: name.to_string(), version_spec: version.to_string() })
}

fn cmake(text: &str, language: LanguageId) -> (Vec<Dependency>, Option<String>) {
    let deps = FIND_PACKAGE
        .captures_iter(text)
        .map(|c| Dependency {
            name: c[1].to_string(),
            version_spec: c.get(2).map_or(String::new(), |m| m.as_str().to_string()),
        })
        .collect();
    let wanted = if language == LanguageId::Cpp { "CXX" } else { "C" };
    let version = CMAKE_STANDARD
        .captures_iter(text)
        .find(|c| &c[1] == wanted)
        .map(|c| format!("{}{}", if wanted == "CXX" { "c++" } else { "c" }, &c[2]));
    (deps, version)
}

fn makefile(text: &str) -> (Vec<Dependency>, Option<String>) {
    let mut deps: Vec<Dependency> = Vec::new();
    for c in LIB_FLAG.captures_iter(text) {
        if !deps.iter().any(|d| d.name == c[1]) {
            deps.push(Dependency { name: c[1].to_string(), version_spec: String::new() });
        }
    }
    (deps, STD_FLAG.captures(text).map(|c| c[1].to_string()))
}
