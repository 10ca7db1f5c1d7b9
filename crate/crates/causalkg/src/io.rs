//! On-disk formats for pipeline artifacts.
//!
//! - corpus: JSON Lines of [`AbstractRecord`]
//! - extraction report: one JSON document
//! - refined relations: JSON Lines of [`RefinedRecord`], plus a stats JSON
//! - graph: N-Triples
//! - index: `KGV1` snapshot

use std::fs;
use std::path::{Path, PathBuf};

use causalkg_core::graph::{parse_ntriples, serialize_ntriples};
use causalkg_core::refinement::RefinedRecord;
use causalkg_core::vector::{decode_snapshot, encode_snapshot};
use causalkg_core::{AbstractRecord, ExtractionReport, GraphStore, OntologySpec, RefinedRelation, VectorIndex};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Fs { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Record { path: PathBuf, line: usize, message: String },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn fs_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Fs { path: path.to_path_buf(), source }
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(fs_err(path))
}

/// Writes via a sibling temp file so readers never see a partial artifact.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(fs_err(dir))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(fs_err(&tmp))?;
    fs::rename(&tmp, path).map_err(fs_err(path))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    let text = read_text(path)?;
    parse_jsonl(&text).map_err(|(line, message)| IoError::Record { path: path.to_path_buf(), line, message })
}

/// Parses JSON Lines; blank lines are skipped. Errors carry the 1-based line.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, (usize, String)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i + 1, e.to_string())))
        .collect()
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).expect("values serialize");
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| IoError::Format { path: path.to_path_buf(), message: e.to_string() })
}

/// Reads a corpus and checks every record.
pub fn read_corpus(path: &Path) -> Result<Vec<AbstractRecord>, IoError> {
    let text = read_text(path)?;
    parse_corpus(&text).map_err(|(line, message)| IoError::Record { path: path.to_path_buf(), line, message })
}

pub fn parse_corpus(text: &str) -> Result<Vec<AbstractRecord>, (usize, String)> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: AbstractRecord = serde_json::from_str(line).map_err(|e| (i + 1, e.to_string()))?;
        record.validate().map_err(|e| (i + 1, e.to_string()))?;
        out.push(record);
    }
    Ok(out)
}

pub fn read_report(path: &Path) -> Result<ExtractionReport, IoError> {
    let report: ExtractionReport = read_json(path)?;
    if report.relation_count != report.relations.len() {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            message: format!(
                "relation_count {} does not match {} relations",
                report.relation_count,
                report.relations.len()
            ),
        });
    }
    Ok(report)
}

pub fn write_refined(path: &Path, relations: &[RefinedRelation]) -> Result<(), IoError> {
    let records: Vec<RefinedRecord> = relations.iter().map(RefinedRelation::to_record).collect();
    write_bytes(path, to_jsonl(&records).as_bytes())
}

/// Reads refined relations, checking labels and canonical names against `spec`.
pub fn read_refined(path: &Path, spec: &OntologySpec) -> Result<Vec<RefinedRelation>, IoError> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| IoError::Record { path: path.to_path_buf(), line: i + 1, message };
        let record: RefinedRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        out.push(record.into_refined(spec).map_err(|e| err(e.to_string()))?);
    }
    Ok(out)
}

pub fn write_graph(path: &Path, store: &GraphStore) -> Result<(), IoError> {
    write_bytes(path, serialize_ntriples(store).as_bytes())
}

pub fn read_graph(path: &Path) -> Result<GraphStore, IoError> {
    let text = read_text(path)?;
    parse_ntriples(&text).map_err(|e| IoError::Format { path: path.to_path_buf(), message: e.to_string() })
}

pub fn write_snapshot(path: &Path, index: &VectorIndex) -> Result<(), IoError> {
    write_bytes(path, &encode_snapshot(index))
}

pub fn read_snapshot(path: &Path) -> Result<VectorIndex, IoError> {
    let bytes = fs::read(path).map_err(fs_err(path))?;
    decode_snapshot(&bytes).map_err(|e| IoError::Format { path: path.to_path_buf(), message: e.to_string() })
}
