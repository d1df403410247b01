//! Corpus ingestion, interface extraction and size/complexity metrics.

pub mod lex;
pub mod metrics;
pub mod parse;
pub mod types;

pub use metrics::{compute_metrics, corpus_report, CommandTokenizer, CorpusReport, DefaultTokenizer, MetricRow, Tokenizer};
pub use types::{CType, CodeMetrics, DeclType, FunctionInterface, GlobalRef, Param, Scalar, SourceUnit};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use walkdir::WalkDir;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read corpus directory {path}: {source}")]
    Dir { path: PathBuf, source: std::io::Error },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: malformed manifest line `{text}`")]
    Manifest { path: PathBuf, line: usize, text: String },
    #[error("tokenizer failed: {0}")]
    Tokenizer(String),
}

pub const DEFAULT_GROUP: &str = "default";

/// All `.c` files of a corpus directory, sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusIndex {
    pub root: PathBuf,
    pub units: Vec<SourceUnit>,
    /// Header files found next to the sources (relative ids).
    pub headers: Vec<String>,
    pub warnings: Vec<String>,
}

impl CorpusIndex {
    pub fn unit(&self, id: &str) -> Option<&SourceUnit> {
        self.units.iter().find(|u| u.id == id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.units.iter().map(|u| u.id.clone()).collect()
    }
}

/// Parses a group manifest: one `file-id = group` per line, `#` starts a comment.
pub fn parse_group_manifest(text: &str, path: &Path) -> Result<BTreeMap<String, String>, CorpusError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=').or_else(|| line.split_once(':')) else {
            return Err(CorpusError::Manifest { path: path.to_path_buf(), line: i + 1, text: raw.to_string() });
        };
        let (k, v) = (k.trim(), v.trim().trim_matches('"'));
        if k.is_empty() || v.is_empty() {
            return Err(CorpusError::Manifest { path: path.to_path_buf(), line: i + 1, text: raw.to_string() });
        }
        out.insert(k.trim_matches('"').to_string(), v.to_string());
    }
    Ok(out)
}

pub fn load_group_manifest(path: &Path) -> Result<BTreeMap<String, String>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    parse_group_manifest(&text, path)
}

fn rel_id(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

pub fn load_corpus(dir: &Path, group_map: Option<&BTreeMap<String, String>>) -> Result<CorpusIndex, CorpusError> {
    std::fs::read_dir(dir).map_err(|source| CorpusError::Dir { path: dir.to_path_buf(), source })?;
    let mut sources = Vec::new();
    let mut headers = Vec::new();
    let mut warnings = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                warnings.push(format!("skipping unreadable entry: {e}"));
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        match path.extension().and_then(|e| e.to_str()) {
            Some("c") => sources.push(path.to_path_buf()),
            Some("h") => headers.push(rel_id(dir, path)),
            _ => {}
        }
    }
    let mut units = Vec::new();
    for path in sources {
        let id = rel_id(dir, &path);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) => {
                warnings.push(format!("{id}: skipped, cannot read: {e}"));
                continue;
            }
        };
        let text = match String::from_utf8(bytes) {
            Ok(t) => t,
            Err(_) => {
                warnings.push(format!("{id}: skipped, not valid UTF-8"));
                continue;
            }
        };
        if text.trim().is_empty() {
            warnings.push(format!("{id}: skipped, empty file"));
            continue;
        }
        let group = group_map.and_then(|m| m.get(&id)).cloned().unwrap_or_else(|| DEFAULT_GROUP.to_string());
        units.push(SourceUnit::from_text(id, group, text));
    }
    units.sort_by(|a, b| a.id.cmp(&b.id));
    headers.sort();
    Ok(CorpusIndex { root: dir.to_path_buf(), units, headers, warnings })
}

/// Interfaces of a unit together with extraction warnings.
pub fn extract_interfaces(unit: &SourceUnit) -> (Vec<FunctionInterface>, Vec<String>) {
    parse::extract(&unit.text)
}
