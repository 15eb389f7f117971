//! Keyword-to-topic retrieval: embed each chit-chat keyword, compare it to
//! every topic embedding (the mean of the topic's top-word embeddings), and
//! collect the member sequences of the best-matching topics with dialogue
//! provenance.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Speaker;
use crate::embed::{cosine_similarity, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::topics::{Topic, TopicModel};

/// The default chit-chat reference phrases.
pub const DEFAULT_KEYWORDS: [&str; 5] = [
    "personal relationships",
    "personal experiences",
    "emotional experiences and feelings",
    "sport and leisure",
    "work and school",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordSet {
    keywords: Vec<String>,
}

impl KeywordSet {
    pub fn new(keywords: impl IntoIterator<Item = String>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        for keyword in keywords {
            let trimmed = keyword.trim().to_string();
            if trimmed.is_empty() {
                return Err(Error::Contract("keywords must be non-empty".into()));
            }
            if !seen.insert(trimmed.clone()) {
                return Err(Error::Contract(format!("duplicate keyword {trimmed:?}")));
            }
            out.push(trimmed);
        }
        if out.is_empty() {
            return Err(Error::Contract("keyword set must be non-empty".into()));
        }
        Ok(Self { keywords: out })
    }

    /// Parse a `"k1;k2;..."` list.
    pub fn parse(raw: &str) -> Result<Self> {
        Self::new(raw.split(';').map(str::to_string))
    }

    pub fn keywords(&self) -> &[String] {
        &self.keywords
    }
}

impl Default for KeywordSet {
    fn default() -> Self {
        Self::new(DEFAULT_KEYWORDS.iter().map(|s| s.to_string()))
            .expect("default keywords are valid")
    }
}

/// One sequence with provenance, as reported in hits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceRef {
    pub text: String,
    pub dialogue_id: String,
    #[serde(rename = "turn")]
    pub turn_index: usize,
    pub speaker: Speaker,
}

/// One (keyword, topic) match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProspectHit {
    pub keyword: String,
    pub topic_id: i32,
    pub score: f32,
    pub topic_words: Vec<String>,
    pub sequences: Vec<SequenceRef>,
}

/// Mean of the top-word embeddings, each word embedded separately. The mean
/// is deliberately not re-normalized.
pub fn topic_embedding<E: EmbeddingProvider + ?Sized>(
    topic: &Topic,
    embedder: &E,
) -> Result<Vec<f32>> {
    if topic.word_weights.is_empty() {
        return Err(Error::Contract(format!(
            "topic {} has no top words",
            topic.topic_id
        )));
    }
    let words: Vec<&str> = topic.words();
    let matrix = embedder.embed(&words)?;
    Ok(mean_rows(
        &(0..matrix.rows())
            .map(|i| matrix.row(i))
            .collect::<Vec<_>>(),
        matrix.dim(),
    ))
}

fn mean_rows(rows: &[&[f32]], dim: usize) -> Vec<f32> {
    let mut mean = vec![0.0f64; dim];
    for row in rows {
        for (acc, v) in mean.iter_mut().zip(row.iter()) {
            *acc += f64::from(*v);
        }
    }
    mean.into_iter()
        .map(|v| (v / rows.len() as f64) as f32)
        .collect()
}

/// All member sequences of one topic, ordered by (dialogue id, turn index).
pub fn collect_sequences(model: &TopicModel, topic_id: i32) -> Result<Vec<SequenceRef>> {
    let topic = model.topic(topic_id)?;
    let mut sequences: Vec<SequenceRef> = topic
        .member_doc_ids
        .iter()
        .map(|&doc_id| {
            let doc = &model.documents[doc_id];
            SequenceRef {
                text: doc.text.clone(),
                dialogue_id: doc.dialogue_id.clone(),
                turn_index: doc.turn_index,
                speaker: doc.speaker,
            }
        })
        .collect();
    sequences.sort_by(|a, b| {
        a.dialogue_id
            .cmp(&b.dialogue_id)
            .then(a.turn_index.cmp(&b.turn_index))
    });
    Ok(sequences)
}

/// For each keyword, the `min(top_k, K)` most similar topics,
/// score-descending, ties broken by lower topic id. Hits carry the topic's
/// full member sequences.
pub fn query<E: EmbeddingProvider + ?Sized>(
    model: &TopicModel,
    keywords: &KeywordSet,
    embedder: &E,
    top_k: usize,
) -> Result<Vec<ProspectHit>> {
    if model.topics.is_empty() {
        return Err(Error::NoTopics);
    }
    if top_k < 1 {
        return Err(Error::Contract("top_k must be >= 1".into()));
    }

    // One batched call for all topic words, one for the keywords.
    let mut word_texts: Vec<&str> = Vec::new();
    let mut ranges: Vec<(usize, usize)> = Vec::with_capacity(model.topics.len());
    for topic in &model.topics {
        if topic.word_weights.is_empty() {
            return Err(Error::Contract(format!(
                "topic {} has no top words",
                topic.topic_id
            )));
        }
        let start = word_texts.len();
        word_texts.extend(topic.words());
        ranges.push((start, word_texts.len()));
    }
    let word_matrix = embedder.embed(&word_texts)?;
    let topic_embeddings: Vec<Vec<f32>> = ranges
        .iter()
        .map(|&(start, end)| {
            let rows: Vec<&[f32]> = (start..end).map(|i| word_matrix.row(i)).collect();
            mean_rows(&rows, word_matrix.dim())
        })
        .collect();

    let keyword_texts: Vec<&str> = keywords.keywords().iter().map(String::as_str).collect();
    let keyword_matrix = embedder.embed(&keyword_texts)?;
    if keyword_matrix.dim() != word_matrix.dim() {
        return Err(Error::Protocol(format!(
            "keyword embeddings have dim {} but topic embeddings have dim {}",
            keyword_matrix.dim(),
            word_matrix.dim()
        )));
    }

    let mut hits = Vec::with_capacity(keywords.keywords().len() * top_k.min(model.topics.len()));
    for (k_idx, keyword) in keywords.keywords().iter().enumerate() {
        let keyword_row = keyword_matrix.row(k_idx);
        let mut scored: Vec<(i32, f64)> = model
            .topics
            .iter()
            .zip(&topic_embeddings)
            .map(|(topic, emb)| (topic.topic_id, cosine_similarity(keyword_row, emb)))
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for &(topic_id, score) in scored.iter().take(top_k) {
            let topic = model.topic(topic_id)?;
            hits.push(ProspectHit {
                keyword: keyword.clone(),
                topic_id,
                score: score as f32,
                topic_words: topic.words().iter().map(|w| w.to_string()).collect(),
                sequences: collect_sequences(model, topic_id)?,
            });
        }
    }
    Ok(hits)
}

// ---------------------------------------------------------------------------
// Hits persistence
// ---------------------------------------------------------------------------

pub fn hits_to_json(hits: &[ProspectHit]) -> Result<String> {
    serde_json::to_string_pretty(hits)
        .map_err(|e| Error::Validation(format!("serialize hits: {e}")))
}

pub fn write_hits(hits: &[ProspectHit], path: &Path) -> Result<()> {
    let json = hits_to_json(hits)?;
    std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_hits(path: &Path) -> Result<Vec<ProspectHit>> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value = crate::jsonutil::parse_value(path, &raw)?;
    crate::jsonutil::from_value(path, "", value)
}
