//! Turns utterances into topic-model documents: either one document per
//! turn (raw utterances) or at most one filtered clause per turn.
//!
//! The clause path splits an utterance with a deterministic rule set, drops
//! clauses whose content tokens overlap the turn's annotation string, drops
//! the whole turn when only a single clause was detected, and keeps the one
//! surviving clause least similar to the annotation embedding.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::corpus::{annotation_text, Corpus, Speaker};
use crate::embed::{cosine_similarity, EmbeddingMatrix, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::jsonutil;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Granularity {
    Utterance,
    Clause,
}

/// One unit fed to the topic model, with provenance back to its turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: usize,
    pub text: String,
    pub dialogue_id: String,
    pub turn_index: usize,
    pub speaker: Speaker,
    pub granularity: Granularity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentMode {
    Utterances,
    FilteredClauses,
}

// ---------------------------------------------------------------------------
// Stopwords
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct StopwordList {
    words: HashSet<String>,
}

impl StopwordList {
    pub fn new(words: impl IntoIterator<Item = String>) -> Result<Self> {
        let mut set = HashSet::new();
        for word in words {
            if word.chars().any(char::is_whitespace) {
                return Err(Error::Contract(format!(
                    "stopword {word:?} contains whitespace"
                )));
            }
            if word != word.to_lowercase() {
                return Err(Error::Contract(format!(
                    "stopword {word:?} is not lowercase"
                )));
            }
            if !word.is_empty() {
                set.insert(word);
            }
        }
        Ok(Self { words: set })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::new(raw.lines().map(|l| l.trim().to_string()))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// The shipped ~170-word English list.
pub fn default_stopwords() -> &'static StopwordList {
    static LIST: OnceLock<StopwordList> = OnceLock::new();
    LIST.get_or_init(|| {
        StopwordList::new(
            include_str!("../data/stopwords.txt")
                .lines()
                .map(|l| l.trim().to_string()),
        )
        .expect("embedded stopword list is valid")
    })
}

fn verb_lexicon() -> &'static HashSet<&'static str> {
    static VERBS: OnceLock<HashSet<&'static str>> = OnceLock::new();
    VERBS.get_or_init(|| {
        include_str!("../data/verbs.txt")
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect()
    })
}

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

/// Strip non-alphanumeric characters from both token edges, keeping inner
/// ones (apostrophes, hyphens).
pub(crate) fn strip_edge_punct(token: &str) -> &str {
    token.trim_matches(|c: char| !c.is_alphanumeric())
}

/// Lowercased, edge-stripped, non-empty tokens.
pub(crate) fn norm_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().filter_map(|t| {
        let stripped = strip_edge_punct(t);
        if stripped.is_empty() {
            None
        } else {
            Some(stripped.to_lowercase())
        }
    })
}

fn content_tokens(text: &str, stopwords: &StopwordList) -> HashSet<String> {
    norm_tokens(text)
        .filter(|t| !stopwords.contains(t))
        .collect()
}

// ---------------------------------------------------------------------------
// Clause splitting
// ---------------------------------------------------------------------------

const CONJUNCTIONS: &[&str] = &[
    "and", "but", "or", "so", "because", "since", "although", "while", "when", "if", "that",
    "which", "who", "where", "after", "before",
];

const PRONOUNS: &[&str] = &[
    "i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us", "them", "my", "your",
    "his", "its", "our", "their", "mine", "yours", "hers", "ours", "theirs", "this", "these",
    "those",
];

fn is_conjunction(normalized: &str) -> bool {
    CONJUNCTIONS.contains(&normalized)
}

fn is_pronoun_initial(normalized: &str) -> bool {
    // Contractions count by their stem: "i'm" opens a pronoun segment.
    let stem = normalized.split('\'').next().unwrap_or(normalized);
    PRONOUNS.contains(&stem)
}

/// Byte span of one whitespace token in the original text.
#[derive(Clone, Copy)]
struct Span {
    start: usize,
    end: usize,
}

fn token_spans(text: &str) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                spans.push(Span { start: s, end: i });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        spans.push(Span {
            start: s,
            end: text.len(),
        });
    }
    spans
}

/// A token like `now.` or a lone `?` closes a sentence.
fn ends_sentence(token: &str) -> bool {
    let trimmed = token.trim_end_matches(['"', '\'', ')', ']']);
    trimmed.ends_with(['.', '!', '?'])
}

/// Split an utterance into clauses.
///
/// Rules, applied in order within each sentence:
/// 1. sentences split on `.`, `!`, `?`;
/// 2. a boundary opens before a subordinating/coordinating conjunction
///    followed by at least two more tokens;
/// 3. a boundary opens before `to` when the next token is a common verb;
/// 4. a boundary opens after a comma when a pronoun-initial segment of at
///    least two tokens follows.
///
/// Concatenating the clauses in order reproduces the input token sequence
/// up to whitespace and boundary punctuation. Whitespace-only input yields
/// an empty list.
pub fn split_clauses(utterance: &str) -> Vec<String> {
    let spans = token_spans(utterance);
    if spans.is_empty() {
        return Vec::new();
    }
    let tokens: Vec<&str> = spans.iter().map(|s| &utterance[s.start..s.end]).collect();
    let normalized: Vec<String> = tokens
        .iter()
        .map(|t| strip_edge_punct(t).to_lowercase())
        .collect();

    // Sentence ranges over token indices.
    let mut sentences: Vec<(usize, usize)> = Vec::new();
    let mut sent_start = 0;
    for (i, token) in tokens.iter().enumerate() {
        if ends_sentence(token) {
            sentences.push((sent_start, i + 1));
            sent_start = i + 1;
        }
    }
    if sent_start < tokens.len() {
        sentences.push((sent_start, tokens.len()));
    }

    let mut clauses = Vec::new();
    for &(start, end) in &sentences {
        let mut cuts: Vec<usize> = vec![start];
        for idx in start + 1..end {
            let word = normalized[idx].as_str();
            let remaining_after = end - idx - 1;
            let boundary = (is_conjunction(word) && remaining_after >= 2)
                || (word == "to"
                    && idx + 1 < end
                    && verb_lexicon().contains(normalized[idx + 1].as_str()))
                || (tokens[idx - 1].ends_with(',') && is_pronoun_initial(word) && end - idx >= 2);
            if boundary && *cuts.last().expect("non-empty") != idx {
                cuts.push(idx);
            }
        }
        cuts.push(end);
        for pair in cuts.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            if lo >= hi {
                continue;
            }
            let raw = &utterance[spans[lo].start..spans[hi - 1].end];
            let clause = raw.trim_matches(|c: char| c.is_whitespace() || ".,!?;:".contains(c));
            if !clause.is_empty() {
                clauses.push(clause.to_string());
            }
        }
    }
    clauses
}

// ---------------------------------------------------------------------------
// Task-overlap filter and candidate selection
// ---------------------------------------------------------------------------

/// True when the clause shares at least one content token with the
/// annotation string (lowercased, edge punctuation stripped, stopwords
/// removed). An empty annotation never overlaps.
pub fn has_task_overlap(clause: &str, annotation: &str, stopwords: &StopwordList) -> bool {
    let annotation_tokens = content_tokens(annotation, stopwords);
    if annotation_tokens.is_empty() {
        return false;
    }
    norm_tokens(clause).any(|t| !stopwords.contains(&t) && annotation_tokens.contains(&t))
}

/// Survivor indices after the overlap filter, plus how many survivors were
/// discarded for having no content tokens left to classify.
fn filter_survivors(
    clauses: &[String],
    annotation: &str,
    stopwords: &StopwordList,
) -> (Vec<usize>, usize) {
    let mut survivors = Vec::new();
    let mut skipped_short = 0;
    for (i, clause) in clauses.iter().enumerate() {
        if has_task_overlap(clause, annotation, stopwords) {
            continue;
        }
        if content_tokens(clause, stopwords).is_empty() {
            skipped_short += 1;
            continue;
        }
        survivors.push(i);
    }
    (survivors, skipped_short)
}

/// Index (into `survivor_rows`) of the row least similar to `annotation_row`,
/// ties resolved to the earliest position.
fn least_similar(survivor_rows: &[&[f32]], annotation_row: &[f32]) -> usize {
    let mut best = 0;
    let mut best_sim = f64::INFINITY;
    for (i, row) in survivor_rows.iter().enumerate() {
        let sim = cosine_similarity(row, annotation_row);
        if sim < best_sim {
            best_sim = sim;
            best = i;
        }
    }
    best
}

/// Pick the open-domain candidate clause for one utterance, if any.
///
/// Returns nothing for single-clause utterances and when every clause is
/// task-related. With an empty annotation all survivor similarities are
/// defined as 0, so the earliest survivor wins.
pub fn select_odd_candidate<E: EmbeddingProvider + ?Sized>(
    clauses: &[String],
    annotation: &str,
    embedder: &E,
    stopwords: &StopwordList,
) -> Result<Option<String>> {
    if clauses.len() <= 1 {
        return Ok(None);
    }
    let (survivors, _skipped) = filter_survivors(clauses, annotation, stopwords);
    if survivors.is_empty() {
        return Ok(None);
    }
    if annotation.trim().is_empty() {
        return Ok(Some(clauses[survivors[0]].clone()));
    }
    let mut texts: Vec<&str> = survivors.iter().map(|&i| clauses[i].as_str()).collect();
    texts.push(annotation);
    let matrix = embedder.embed(&texts)?;
    let rows: Vec<&[f32]> = (0..survivors.len()).map(|i| matrix.row(i)).collect();
    let winner = least_similar(&rows, matrix.row(survivors.len()));
    Ok(Some(clauses[survivors[winner]].clone()))
}

// ---------------------------------------------------------------------------
// Document construction
// ---------------------------------------------------------------------------

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct SegmentStats {
    pub turns: usize,
    pub documents: usize,
    /// Turns dropped by the single-clause rule.
    pub single_clause_turns: usize,
    /// Turns where every clause was task-related (or too short to rank).
    pub fully_task_turns: usize,
    /// Survivor clauses discarded for having no content tokens.
    pub skipped_short_clauses: usize,
}

pub fn build_documents<E: EmbeddingProvider + ?Sized>(
    corpus: &Corpus,
    mode: SegmentMode,
    embedder: &E,
    stopwords: &StopwordList,
) -> Result<Vec<Document>> {
    build_documents_with_stats(corpus, mode, embedder, stopwords).map(|(docs, _)| docs)
}

pub fn build_documents_with_stats<E: EmbeddingProvider + ?Sized>(
    corpus: &Corpus,
    mode: SegmentMode,
    embedder: &E,
    stopwords: &StopwordList,
) -> Result<(Vec<Document>, SegmentStats)> {
    if corpus.dialogues.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut stats = SegmentStats::default();
    let mut documents = Vec::new();

    match mode {
        SegmentMode::Utterances => {
            for (dialogue, turn) in corpus.turns() {
                stats.turns += 1;
                documents.push(Document {
                    doc_id: documents.len(),
                    text: turn.text.clone(),
                    dialogue_id: dialogue.dialogue_id.clone(),
                    turn_index: turn.turn_index,
                    speaker: turn.speaker,
                    granularity: Granularity::Utterance,
                });
            }
        }
        SegmentMode::FilteredClauses => {
            // Gather every text to embed into one batch so service-backed
            // providers see few large requests; output order stays corpus
            // iteration order regardless.
            struct Pending {
                dialogue_id: String,
                turn_index: usize,
                speaker: Speaker,
                clauses: Vec<String>,
                survivors: Vec<usize>,
                annotation: String,
                batch_start: usize,
            }
            let mut pending: Vec<Pending> = Vec::new();
            let mut batch: Vec<String> = Vec::new();

            for (dialogue, turn) in corpus.turns() {
                stats.turns += 1;
                let clauses = split_clauses(&turn.text);
                if clauses.len() <= 1 {
                    stats.single_clause_turns += 1;
                    continue;
                }
                let annotation = annotation_text(turn);
                let (survivors, skipped) = filter_survivors(&clauses, &annotation, stopwords);
                stats.skipped_short_clauses += skipped;
                if survivors.is_empty() {
                    stats.fully_task_turns += 1;
                    continue;
                }
                let batch_start = batch.len();
                if !annotation.trim().is_empty() {
                    batch.extend(survivors.iter().map(|&i| clauses[i].clone()));
                    batch.push(annotation.clone());
                }
                pending.push(Pending {
                    dialogue_id: dialogue.dialogue_id.clone(),
                    turn_index: turn.turn_index,
                    speaker: turn.speaker,
                    clauses,
                    survivors,
                    annotation,
                    batch_start,
                });
            }

            let matrix: Option<EmbeddingMatrix> = if batch.is_empty() {
                None
            } else {
                let texts: Vec<&str> = batch.iter().map(String::as_str).collect();
                Some(embedder.embed(&texts)?)
            };

            for turn in pending {
                let winner = if turn.annotation.trim().is_empty() {
                    turn.survivors[0]
                } else {
                    let matrix = matrix.as_ref().expect("batched turns have embeddings");
                    let rows: Vec<&[f32]> = (0..turn.survivors.len())
                        .map(|i| matrix.row(turn.batch_start + i))
                        .collect();
                    let annotation_row = matrix.row(turn.batch_start + turn.survivors.len());
                    turn.survivors[least_similar(&rows, annotation_row)]
                };
                documents.push(Document {
                    doc_id: documents.len(),
                    text: turn.clauses[winner].clone(),
                    dialogue_id: turn.dialogue_id,
                    turn_index: turn.turn_index,
                    speaker: turn.speaker,
                    granularity: Granularity::Clause,
                });
            }
        }
    }

    stats.documents = documents.len();
    Ok((documents, stats))
}

// ---------------------------------------------------------------------------
// Document persistence (JSON-lines)
// ---------------------------------------------------------------------------

pub fn write_documents(documents: &[Document], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for doc in documents {
        let line = serde_json::to_string(doc)
            .map_err(|e| Error::Validation(format!("serialize document: {e}")))?;
        out.write_all(line.as_bytes())
            .map_err(|e| Error::io(path, e))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_documents(path: &Path) -> Result<Vec<Document>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut documents: Vec<Document> = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = jsonutil::parse_value(path, &line)?;
        let doc: Document = jsonutil::from_value(path, &format!("line {}", line_no + 1), value)?;
        documents.push(doc);
    }
    for (i, doc) in documents.iter().enumerate() {
        if doc.doc_id != i {
            return Err(Error::Validation(format!(
                "document ids must be dense: expected {i}, found {}",
                doc.doc_id
            )));
        }
        if doc.text.trim().is_empty() {
            return Err(Error::Validation(format!("document {i} has empty text")));
        }
    }
    Ok(documents)
}
