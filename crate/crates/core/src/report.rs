//! Rendering of prospecting results (tables, turn-number histogram) and the
//! model artifact directory: manifest.json, documents.jsonl, embeddings.bin,
//! assignments.jsonl, topics.json.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embed::{read_cache, write_cache, EmbedderConfig};
use crate::error::{Error, Result};
use crate::jsonutil;
use crate::prospect::ProspectHit;
use crate::segment::{read_documents, write_documents};
use crate::topics::{ClusterAssignment, FitParams, TermCounts, Topic, TopicModel, NOISE};

// ---------------------------------------------------------------------------
// Turn distribution
// ---------------------------------------------------------------------------

/// Count each (keyword, topic, sequence) entry once, keyed by turn index.
pub fn turn_distribution(hits: &[ProspectHit]) -> BTreeMap<usize, usize> {
    let mut counts = BTreeMap::new();
    for hit in hits {
        for sequence in &hit.sequences {
            *counts.entry(sequence.turn_index).or_insert(0) += 1;
        }
    }
    counts
}

/// Two-column CSV (`turn,count`), ascending turn.
pub fn write_turn_histogram(distribution: &BTreeMap<usize, usize>, path: &Path) -> Result<()> {
    let mut out = String::from("turn,count\n");
    for (turn, count) in distribution {
        let _ = writeln!(out, "{turn},{count}");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Csv,
}

const TABLE_COLUMNS: [&str; 5] = ["keyword", "topic_id", "sequence", "turn", "speaker"];

/// One row per (keyword, topic, sequence). CSV is RFC-4180-quoted UTF-8
/// with LF line endings; Markdown uses pipe tables.
pub fn render_table(hits: &[ProspectHit], format: TableFormat) -> String {
    let rows = hits.iter().flat_map(|hit| {
        hit.sequences.iter().map(move |sequence| {
            [
                hit.keyword.clone(),
                hit.topic_id.to_string(),
                sequence.text.clone(),
                sequence.turn_index.to_string(),
                sequence.speaker.to_string(),
            ]
        })
    });
    match format {
        TableFormat::Csv => {
            let mut out = String::new();
            let _ = writeln!(out, "{}", TABLE_COLUMNS.join(","));
            for row in rows {
                let cells: Vec<String> = row.iter().map(|c| csv_field(c)).collect();
                let _ = writeln!(out, "{}", cells.join(","));
            }
            out
        }
        TableFormat::Markdown => {
            let mut out = String::new();
            let _ = writeln!(out, "| {} |", TABLE_COLUMNS.join(" | "));
            let _ = writeln!(out, "|{}", " --- |".repeat(TABLE_COLUMNS.len()));
            for row in rows {
                let cells: Vec<String> = row.iter().map(|c| markdown_cell(c)).collect();
                let _ = writeln!(out, "| {} |", cells.join(" | "));
            }
            out
        }
    }
}

fn csv_field(raw: &str) -> String {
    if raw.contains(',') || raw.contains('"') || raw.contains('\n') || raw.contains('\r') {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw.to_string()
    }
}

fn markdown_cell(raw: &str) -> String {
    raw.replace('|', "\\|").replace('\n', " ")
}

// ---------------------------------------------------------------------------
// Model artifact directory
// ---------------------------------------------------------------------------

const MANIFEST_VERSION: u32 = 1;

const MANIFEST_FILE: &str = "manifest.json";
const DOCUMENTS_FILE: &str = "documents.jsonl";
const EMBEDDINGS_FILE: &str = "embeddings.bin";
const ASSIGNMENTS_FILE: &str = "assignments.jsonl";
const TOPICS_FILE: &str = "topics.json";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    params: FitParams,
    embedder: EmbedderConfig,
    counts: ManifestCounts,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestCounts {
    documents: usize,
    topics: usize,
    noise: usize,
    vocabulary: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct AssignmentLine {
    doc_id: usize,
    topic_id: i32,
}

#[derive(Debug, Serialize, Deserialize)]
struct TopicEntry {
    topic_id: i32,
    words: Vec<(String, f64)>,
    size: usize,
}

/// Write the complete artifact set. Output is byte-deterministic for a
/// given model.
pub fn export_model(model: &TopicModel, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let manifest = Manifest {
        version: MANIFEST_VERSION,
        params: model.params.clone(),
        embedder: sanitized_embedder(&model.embedder),
        counts: ManifestCounts {
            documents: model.documents.len(),
            topics: model.topics.len(),
            noise: model.assignment.noise_count(),
            vocabulary: model.vocabulary.len(),
        },
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Validation(format!("serialize manifest: {e}")))?;
    std::fs::write(dir.join(MANIFEST_FILE), manifest_json + "\n")
        .map_err(|e| Error::io(dir.join(MANIFEST_FILE), e))?;

    write_documents(&model.documents, &dir.join(DOCUMENTS_FILE))?;
    write_cache(&dir.join(EMBEDDINGS_FILE), &model.embeddings)?;

    let assignments_path = dir.join(ASSIGNMENTS_FILE);
    let file =
        std::fs::File::create(&assignments_path).map_err(|e| Error::io(&assignments_path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for (doc_id, &topic_id) in model.assignment.labels.iter().enumerate() {
        let line = serde_json::to_string(&AssignmentLine { doc_id, topic_id })
            .map_err(|e| Error::Validation(format!("serialize assignment: {e}")))?;
        out.write_all(line.as_bytes())
            .map_err(|e| Error::io(&assignments_path, e))?;
        out.write_all(b"\n")
            .map_err(|e| Error::io(&assignments_path, e))?;
    }
    out.flush().map_err(|e| Error::io(&assignments_path, e))?;

    let entries: Vec<TopicEntry> = model
        .topics
        .iter()
        .map(|t| TopicEntry {
            topic_id: t.topic_id,
            words: t.word_weights.clone(),
            size: t.member_doc_ids.len(),
        })
        .collect();
    let topics_json = serde_json::to_string_pretty(&entries)
        .map_err(|e| Error::Validation(format!("serialize topics: {e}")))?;
    std::fs::write(dir.join(TOPICS_FILE), topics_json + "\n")
        .map_err(|e| Error::io(dir.join(TOPICS_FILE), e))
}

/// The cache path is a local detail of one run, not part of the artifact.
fn sanitized_embedder(config: &EmbedderConfig) -> EmbedderConfig {
    let mut config = config.clone();
    config.cache_path = None;
    config
}

/// Load and re-validate an artifact directory into a [`TopicModel`].
pub fn import_model(dir: &Path) -> Result<TopicModel> {
    let require = |name: &str| -> Result<std::path::PathBuf> {
        let path = dir.join(name);
        if !path.exists() {
            return Err(Error::MissingFile(path));
        }
        Ok(path)
    };

    let manifest_path = require(MANIFEST_FILE)?;
    let raw = jsonutil::read_to_string(&manifest_path)?;
    let value = jsonutil::parse_value(&manifest_path, &raw)?;
    let manifest: Manifest = jsonutil::from_value(&manifest_path, "", value)?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::VersionMismatch {
            found: manifest.version,
            expected: MANIFEST_VERSION,
        });
    }

    let documents = read_documents(&require(DOCUMENTS_FILE)?)?;
    let embeddings = read_cache(&require(EMBEDDINGS_FILE)?)?;

    let assignments_path = require(ASSIGNMENTS_FILE)?;
    let file =
        std::fs::File::open(&assignments_path).map_err(|e| Error::io(&assignments_path, e))?;
    let mut labels: Vec<i32> = Vec::with_capacity(documents.len());
    for (line_no, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&assignments_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = jsonutil::parse_value(&assignments_path, &line)?;
        let entry: AssignmentLine =
            jsonutil::from_value(&assignments_path, &format!("line {}", line_no + 1), value)?;
        if entry.doc_id != labels.len() {
            return Err(Error::Validation(format!(
                "assignments must be dense by doc_id: line {} holds doc_id {}",
                line_no + 1,
                entry.doc_id
            )));
        }
        if entry.doc_id >= documents.len() {
            return Err(Error::Validation(format!(
                "assignment references unknown doc_id {}",
                entry.doc_id
            )));
        }
        labels.push(entry.topic_id);
    }
    if labels.len() != documents.len() {
        return Err(Error::Validation(format!(
            "{} assignments for {} documents",
            labels.len(),
            documents.len()
        )));
    }

    let topics_path = require(TOPICS_FILE)?;
    let raw = jsonutil::read_to_string(&topics_path)?;
    let value = jsonutil::parse_value(&topics_path, &raw)?;
    let entries: Vec<TopicEntry> = jsonutil::from_value(&topics_path, "", value)?;

    let num_clusters = entries.len();
    for &label in &labels {
        if label != NOISE && (label < 0 || label as usize >= num_clusters) {
            return Err(Error::Validation(format!(
                "assignment label {label} has no topic entry"
            )));
        }
    }
    let assignment = ClusterAssignment {
        labels,
        num_clusters,
    };

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_clusters];
    for (doc_id, &label) in assignment.labels.iter().enumerate() {
        if label >= 0 {
            members[label as usize].push(doc_id);
        }
    }
    let mut topics = Vec::with_capacity(num_clusters);
    for (pos, entry) in entries.into_iter().enumerate() {
        if entry.topic_id != pos as i32 {
            return Err(Error::Validation(format!(
                "topic ids must be dense: position {pos} holds id {}",
                entry.topic_id
            )));
        }
        if entry.size != members[pos].len() {
            return Err(Error::Validation(format!(
                "topic {pos} declares size {} but {} documents are assigned to it",
                entry.size,
                members[pos].len()
            )));
        }
        topics.push(Topic {
            topic_id: entry.topic_id,
            word_weights: entry.words,
            member_doc_ids: std::mem::take(&mut members[pos]),
        });
    }

    // The vocabulary is derived state; rebuild it the same way fitting does.
    let texts: Vec<&str> = documents.iter().map(|d| d.text.as_str()).collect();
    let counts = TermCounts::tally(&texts, &assignment)?;

    let expected = &manifest.counts;
    if expected.documents != documents.len()
        || expected.topics != topics.len()
        || expected.noise != assignment.noise_count()
        || expected.vocabulary != counts.vocabulary.len()
    {
        return Err(Error::Validation(format!(
            "manifest counts do not match artifact contents: {expected:?}"
        )));
    }

    let model = TopicModel {
        documents,
        embeddings,
        vocabulary: counts.vocabulary,
        assignment,
        topics,
        params: manifest.params,
        embedder: manifest.embedder,
    };
    model.validate()?;
    Ok(model)
}
