//! Atomic file output and re-run verification.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::Context;

/// Writes `contents` to `dir/name` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("temporary file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    let target = dir.join(name);
    tmp.persist(&target).with_context(|| format!("writing {}", target.display()))?;
    Ok(())
}

pub fn write_all(dir: &Path, files: &[(&str, String)]) -> anyhow::Result<()> {
    for (name, contents) in files {
        write_atomic(dir, name, contents)?;
    }
    Ok(())
}

/// Config hash recorded in an output file: the leading comment of a CSV
/// or the `config_hash` key of a JSON document.
pub fn recorded_hash(contents: &str) -> Option<String> {
    if let Some(rest) = contents.strip_prefix("# config_hash=") {
        return rest.lines().next().map(str::to_string);
    }
    let doc: serde_json::Value = serde_json::from_str(contents).ok()?;
    doc.get("config_hash")?.as_str().map(str::to_string)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mismatch {
    Missing { file: String },
    Hash { file: String, recorded: Option<String>, expected: String },
    Contents { file: String },
}

impl std::fmt::Display for Mismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mismatch::Missing { file } => write!(f, "{file}: missing"),
            Mismatch::Hash { file, recorded, expected } => {
                write!(f, "{file}: config hash {} does not match {expected}", recorded.as_deref().unwrap_or("<none>"))
            }
            Mismatch::Contents { file } => write!(f, "{file}: contents differ from the re-run"),
        }
    }
}

/// Compares freshly produced files with those already in `dir`.
pub fn verify_against(dir: &Path, files: &[(&str, String)], expected_hash: &str) -> Vec<Mismatch> {
    let mut out = Vec::new();
    for (name, fresh) in files {
        let file = dir.join(name).display().to_string();
        let Ok(existing) = fs::read_to_string(dir.join(name)) else {
            out.push(Mismatch::Missing { file });
            continue;
        };
        let recorded = recorded_hash(&existing);
        if recorded.as_deref() != Some(expected_hash) {
            out.push(Mismatch::Hash { file, recorded, expected: expected_hash.to_string() });
        } else if existing != *fresh {
            out.push(Mismatch::Contents { file });
        }
    }
    out
}
