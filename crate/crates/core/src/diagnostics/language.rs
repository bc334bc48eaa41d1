use std::path::Path;

use thiserror::Error;

use super::LanguageId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot determine the language of {input:?}")]
pub struct UnknownLanguage {
    pub input: String,
}

fn from_extension(ext: &str) -> Option<LanguageId> {
    match ext {
        "c" => Some(LanguageId::C),
        "cc" | "cpp" | "cxx" | "hpp" | "hh" | "hxx" | "c++" => Some(LanguageId::Cpp),
        "py" => Some(LanguageId::Python),
        "go" => Some(LanguageId::Go),
        _ => None,
    }
}

fn from_command(command_line: &str) -> Option<LanguageId> {
    let argv = shlex::split(command_line).unwrap_or_default();
    let program = argv.first()?;
    let name = Path::new(program).file_name()?.to_str()?;
    // Versioned binaries such as gcc-11 or python3.10 map like their base name.
    let base = name.split('-').next().unwrap_or(name);
    match base {
        "gcc" | "cc" | "clang" | "tcc" => Some(LanguageId::C),
        "g++" | "c++" | "clang++" => Some(LanguageId::Cpp),
        "go" => Some(LanguageId::Go),
        _ if base.starts_with("python") => Some(LanguageId::Python),
        _ => None,
    }
}

/// Infers the language from the file extension, falling back to the build
/// command when the extension is ambiguous (`.h`) or unknown.
pub fn detect_language(file_path: &Path, command_line: &str) -> Result<LanguageId, UnknownLanguage> {
    file_path
        .extension()
        .and_then(|e| e.to_str())
        .and_then(from_extension)
        .or_else(|| from_command(command_line))
        .ok_or_else(|| UnknownLanguage { input: file_path.display().to_string() })
}
