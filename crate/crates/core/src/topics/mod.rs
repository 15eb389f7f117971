//! The topic model: reduce embedding dimensionality, cluster with a
//! density-based algorithm, represent each cluster by class-based TF-IDF
//! weights, and iteratively merge topics whose representations are more
//! similar than the merge threshold.

mod ctfidf;
mod hdbscan;
mod pca;

use serde::{Deserialize, Serialize};

use crate::embed::{cosine_similarity_f64, embed_texts, EmbedderConfig, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::segment::Document;

pub use ctfidf::{ctfidf, top_words, vocab_tokens, CtfidfMatrix, TermCounts, Vocabulary};
pub use hdbscan::{cluster_density, ClusterAssignment, NOISE};
pub use pca::{pca_reduce, reduce_dimensions, PcaInfo, PcaReducer, Reducer};

/// Topic representations keep at most this many words.
pub const TOP_WORDS_PER_TOPIC: usize = 10;

pub const DEFAULT_MERGE_THRESHOLD: f64 = 0.915;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub n_components: usize,
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub merge_threshold: f64,
    pub seed: u64,
}

impl Default for FitParams {
    fn default() -> Self {
        Self {
            n_components: 5,
            min_cluster_size: 10,
            min_samples: 5,
            merge_threshold: DEFAULT_MERGE_THRESHOLD,
            seed: crate::embed::DEFAULT_SEED,
        }
    }
}

impl FitParams {
    fn validate(&self) -> Result<()> {
        if self.n_components < 1 {
            return Err(Error::Contract("n_components must be >= 1".into()));
        }
        if self.min_cluster_size < 2 {
            return Err(Error::Contract("min_cluster_size must be >= 2".into()));
        }
        if self.min_samples < 1 || self.min_samples > self.min_cluster_size {
            return Err(Error::Contract(
                "min_samples must be in 1..=min_cluster_size".into(),
            ));
        }
        if !(self.merge_threshold > 0.0 && self.merge_threshold <= 1.0) {
            return Err(Error::Contract(format!(
                "merge_threshold must be in (0, 1], got {}",
                self.merge_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topic {
    pub topic_id: i32,
    /// Up to [`TOP_WORDS_PER_TOPIC`] terms, weight-descending.
    pub word_weights: Vec<(String, f64)>,
    /// Member documents, ascending doc id.
    pub member_doc_ids: Vec<usize>,
}

impl Topic {
    pub fn words(&self) -> Vec<&str> {
        self.word_weights.iter().map(|(t, _)| t.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    pub documents: Vec<Document>,
    /// Original (pre-reduction) document embeddings.
    pub embeddings: EmbeddingMatrix,
    pub vocabulary: Vocabulary,
    pub assignment: ClusterAssignment,
    pub topics: Vec<Topic>,
    pub params: FitParams,
    pub embedder: EmbedderConfig,
}

impl TopicModel {
    /// Assemble a model from already-clustered parts: computes c-TF-IDF
    /// representations and per-topic top words, then re-validates every
    /// invariant.
    pub fn from_parts(
        documents: Vec<Document>,
        embeddings: EmbeddingMatrix,
        assignment: ClusterAssignment,
        params: FitParams,
        embedder: EmbedderConfig,
    ) -> Result<Self> {
        let texts: Vec<&str> = documents.iter().map(|d| d.text.as_str()).collect();
        let counts = TermCounts::tally(&texts, &assignment)?;
        let weights = counts.weights();
        let topics = build_topics(&counts.vocabulary, &weights, &assignment);
        let model = Self {
            documents,
            embeddings,
            vocabulary: counts.vocabulary,
            assignment,
            topics,
            params,
            embedder,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn topic(&self, topic_id: i32) -> Result<&Topic> {
        self.topics
            .iter()
            .find(|t| t.topic_id == topic_id)
            .ok_or(Error::UnknownTopic(topic_id))
    }

    pub fn num_topics(&self) -> usize {
        self.topics.len()
    }

    /// Re-check every structural invariant. Run after fitting and after
    /// importing an artifact.
    pub fn validate(&self) -> Result<()> {
        let n = self.documents.len();
        if n == 0 {
            return Err(Error::Validation("model has no documents".into()));
        }
        for (i, doc) in self.documents.iter().enumerate() {
            if doc.doc_id != i {
                return Err(Error::Validation(format!(
                    "document ids must be dense: position {i} holds id {}",
                    doc.doc_id
                )));
            }
        }
        if self.assignment.labels.len() != n {
            return Err(Error::Validation(format!(
                "{} labels for {n} documents",
                self.assignment.labels.len()
            )));
        }
        if self.embeddings.rows() != n {
            return Err(Error::Validation(format!(
                "embedding matrix has {} rows for {n} documents",
                self.embeddings.rows()
            )));
        }
        self.params.validate()?;
        let k = self.assignment.num_clusters;
        if self.topics.len() != k {
            return Err(Error::Validation(format!(
                "{} topics for {k} clusters",
                self.topics.len()
            )));
        }
        let sizes = self.assignment.cluster_sizes();
        for &label in &self.assignment.labels {
            if label != NOISE && (label < 0 || label as usize >= k) {
                return Err(Error::Validation(format!("label {label} outside 0..{k}")));
            }
        }
        if let Some(small) = sizes.iter().position(|&s| s < self.params.min_cluster_size) {
            return Err(Error::Validation(format!(
                "cluster {small} has {} members, below min_cluster_size {}",
                sizes[small], self.params.min_cluster_size
            )));
        }
        let mut covered = vec![false; n];
        for (pos, topic) in self.topics.iter().enumerate() {
            if topic.topic_id != pos as i32 {
                return Err(Error::Validation(format!(
                    "topic ids must be dense: position {pos} holds id {}",
                    topic.topic_id
                )));
            }
            if topic.word_weights.len() > self.vocabulary.len() {
                return Err(Error::Validation(
                    "more topic words than vocabulary terms".into(),
                ));
            }
            let mut previous = f64::INFINITY;
            for (term, weight) in &topic.word_weights {
                if !weight.is_finite() || *weight < 0.0 {
                    return Err(Error::Validation(format!(
                        "topic {pos} weight for {term:?} is {weight}"
                    )));
                }
                if *weight > previous {
                    return Err(Error::Validation(format!(
                        "topic {pos} words are not weight-sorted"
                    )));
                }
                previous = *weight;
                if self.vocabulary.index_of(term).is_none() {
                    return Err(Error::Validation(format!(
                        "topic {pos} word {term:?} not in vocabulary"
                    )));
                }
            }
            for &doc_id in &topic.member_doc_ids {
                if doc_id >= n {
                    return Err(Error::Validation(format!(
                        "topic {pos} references unknown doc_id {doc_id}"
                    )));
                }
                if covered[doc_id] {
                    return Err(Error::Validation(format!(
                        "doc {doc_id} belongs to two topics"
                    )));
                }
                covered[doc_id] = true;
                if self.assignment.labels[doc_id] != topic.topic_id {
                    return Err(Error::Validation(format!(
                        "doc {doc_id} labelled {} but listed under topic {}",
                        self.assignment.labels[doc_id], topic.topic_id
                    )));
                }
            }
        }
        for (doc_id, &label) in self.assignment.labels.iter().enumerate() {
            if label != NOISE && !covered[doc_id] {
                return Err(Error::Validation(format!(
                    "doc {doc_id} is clustered but listed under no topic"
                )));
            }
        }
        Ok(())
    }
}

fn build_topics(
    vocabulary: &Vocabulary,
    weights: &CtfidfMatrix,
    assignment: &ClusterAssignment,
) -> Vec<Topic> {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); assignment.num_clusters];
    for (doc_id, &label) in assignment.labels.iter().enumerate() {
        if label >= 0 {
            members[label as usize].push(doc_id);
        }
    }
    members
        .into_iter()
        .enumerate()
        .map(|(c, member_doc_ids)| Topic {
            topic_id: c as i32,
            word_weights: top_words(vocabulary, weights.row(c), TOP_WORDS_PER_TOPIC),
            member_doc_ids,
        })
        .collect()
}

/// Iteratively merge the pair of topics with the highest cosine similarity
/// between their c-TF-IDF rows while that similarity strictly exceeds
/// `threshold`. Rows are recomputed from the merged memberships after every
/// step, so no surviving pair can exceed the threshold on recomputation.
pub fn merge_topics(model: &TopicModel, threshold: f64) -> Result<TopicModel> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Contract(format!(
            "merge threshold must be in (0, 1], got {threshold}"
        )));
    }
    let texts: Vec<&str> = model.documents.iter().map(|d| d.text.as_str()).collect();
    let mut counts = TermCounts::tally(&texts, &model.assignment)?;
    // Current cluster index -> original labels it absorbed.
    let mut absorbed: Vec<Vec<i32>> = (0..model.assignment.num_clusters)
        .map(|c| vec![c as i32])
        .collect();

    while counts.num_clusters > 1 {
        let weights = counts.weights();
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..counts.num_clusters {
            for j in i + 1..counts.num_clusters {
                let sim = cosine_similarity_f64(weights.row(i), weights.row(j));
                if best.is_none_or(|(_, _, s)| sim > s) {
                    best = Some((i, j, sim));
                }
            }
        }
        let (i, j, sim) = best.expect("at least one pair");
        if sim > threshold {
            counts.merge_clusters(i, j);
            let moved = absorbed.remove(j);
            absorbed[i].extend(moved);
        } else {
            break;
        }
    }

    // Relabel documents onto the merged, re-densified cluster ids.
    let mut relabel = vec![NOISE; model.assignment.num_clusters];
    for (new_id, old_ids) in absorbed.iter().enumerate() {
        for &old in old_ids {
            relabel[old as usize] = new_id as i32;
        }
    }
    let labels: Vec<i32> = model
        .assignment
        .labels
        .iter()
        .map(|&l| {
            if l == NOISE {
                NOISE
            } else {
                relabel[l as usize]
            }
        })
        .collect();
    let assignment = ClusterAssignment {
        labels,
        num_clusters: absorbed.len(),
    };

    TopicModel::from_parts(
        model.documents.clone(),
        model.embeddings.clone(),
        assignment,
        model.params.clone(),
        model.embedder.clone(),
    )
}

/// Fit the whole model: embed, reduce, cluster, represent, merge.
/// Deterministic given (documents, embedder config, params).
pub fn fit(
    documents: Vec<Document>,
    embedder: &EmbedderConfig,
    params: &FitParams,
) -> Result<TopicModel> {
    params.validate()?;
    if documents.len() < params.min_cluster_size {
        return Err(Error::Contract(format!(
            "need at least min_cluster_size={} documents, got {}",
            params.min_cluster_size,
            documents.len()
        )));
    }

    let texts: Vec<&str> = documents.iter().map(|d| d.text.as_str()).collect();
    let embeddings = embed_texts(&texts, embedder).map_err(|e| e.in_stage("embed"))?;

    let reduced = reduce_dimensions(&embeddings, params.n_components, params.seed)
        .map_err(|e| e.in_stage("reduce"))?;

    let assignment = cluster_density(&reduced, params.min_cluster_size, params.min_samples)
        .map_err(|e| e.in_stage("cluster"))?;

    let unmerged = TopicModel::from_parts(
        documents,
        embeddings,
        assignment,
        params.clone(),
        embedder.clone(),
    )
    .map_err(|e| e.in_stage("ctfidf"))?;

    merge_topics(&unmerged, params.merge_threshold).map_err(|e| e.in_stage("merge"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Speaker;
    use crate::segment::Granularity;

    pub(crate) fn doc(id: usize, text: &str) -> Document {
        Document {
            doc_id: id,
            text: text.into(),
            dialogue_id: format!("d{id}"),
            turn_index: 0,
            speaker: Speaker::User,
            granularity: Granularity::Utterance,
        }
    }

    fn tiny_params(min_cluster_size: usize) -> FitParams {
        FitParams {
            n_components: 2,
            min_cluster_size,
            min_samples: min_cluster_size.min(2),
            ..FitParams::default()
        }
    }

    fn model_from_labels(texts: &[&str], labels: Vec<i32>, min_cluster_size: usize) -> TopicModel {
        let documents: Vec<Document> = texts.iter().enumerate().map(|(i, t)| doc(i, t)).collect();
        let embeddings = embed_texts(texts, &EmbedderConfig::default()).unwrap();
        let num_clusters = labels.iter().copied().max().unwrap_or(-1).max(-1) + 1;
        let assignment = ClusterAssignment {
            labels,
            num_clusters: num_clusters as usize,
        };
        TopicModel::from_parts(
            documents,
            embeddings,
            assignment,
            tiny_params(min_cluster_size),
            EmbedderConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn identical_representations_merge_into_one() {
        let texts = ["alpha beta", "alpha beta", "alpha beta", "alpha beta"];
        let model = model_from_labels(&texts, vec![0, 0, 1, 1], 2);
        assert_eq!(model.num_topics(), 2);
        let merged = merge_topics(&model, DEFAULT_MERGE_THRESHOLD).unwrap();
        assert_eq!(merged.num_topics(), 1, "similarity 1 must merge");
        assert_eq!(merged.topics[0].member_doc_ids, vec![0, 1, 2, 3]);
    }

    #[test]
    fn disjoint_vocabularies_do_not_merge() {
        let texts = [
            "alpha beta gamma",
            "alpha beta",
            "delta epsilon zeta",
            "delta zeta",
        ];
        let model = model_from_labels(&texts, vec![0, 0, 1, 1], 2);
        let merged = merge_topics(&model, DEFAULT_MERGE_THRESHOLD).unwrap();
        assert_eq!(merged.num_topics(), 2, "similarity 0 must not merge");
        assert_eq!(merged.assignment, model.assignment);
    }

    #[test]
    fn merge_is_strictly_greater_than_threshold() {
        // Two clusters over three shared-count patterns tuned so the cosine
        // of their c-TF-IDF rows computes to exactly the threshold used.
        let texts = ["x x y", "y x x", "x y y", "y y x"];
        let model = model_from_labels(&texts, vec![0, 0, 1, 1], 2);
        let texts_ref: Vec<&str> = texts.to_vec();
        let counts = TermCounts::tally(&texts_ref, &model.assignment).unwrap();
        let weights = counts.weights();
        let sim = cosine_similarity_f64(weights.row(0), weights.row(1));
        // With tf rows (4,2) and (2,4) scaled by one shared idf: 16/20 = 0.8.
        assert!((sim - 0.8).abs() < 1e-12);
        let merged_at_sim = merge_topics(&model, sim).unwrap();
        assert_eq!(
            merged_at_sim.num_topics(),
            2,
            "pair exactly at threshold must not merge"
        );
        let merged_below = merge_topics(&model, sim - 1e-9).unwrap();
        assert_eq!(
            merged_below.num_topics(),
            1,
            "pair above threshold must merge"
        );
    }

    #[test]
    fn merge_never_increases_topic_count_and_post_invariant_holds() {
        let texts = [
            "red green blue",
            "red green",
            "green blue red", // cluster 0
            "red green blue shade",
            "red blue green", // cluster 1: near-duplicate of 0
            "cats dogs pets",
            "dogs cats", // cluster 2: unrelated
        ];
        let model = model_from_labels(&texts, vec![0, 0, 0, 1, 1, 2, 2], 2);
        let merged = merge_topics(&model, 0.9).unwrap();
        assert!(merged.num_topics() <= model.num_topics());
        // Recompute representations from final memberships: no pair above.
        let texts_ref: Vec<&str> = merged.documents.iter().map(|d| d.text.as_str()).collect();
        let counts = TermCounts::tally(&texts_ref, &merged.assignment).unwrap();
        let weights = counts.weights();
        for i in 0..merged.num_topics() {
            for j in i + 1..merged.num_topics() {
                let sim = cosine_similarity_f64(weights.row(i), weights.row(j));
                assert!(
                    sim <= 0.9,
                    "pair ({i},{j}) similarity {sim} exceeds threshold"
                );
            }
        }
    }

    fn planted_corpus() -> Vec<Document> {
        // Three disjoint 20-word vocabularies, 40 documents each, sampled
        // deterministically.
        let mut state = 0x123456789abcdefu64;
        let mut next = move |bound: usize| -> usize {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % bound as u64) as usize
        };
        let mut documents = Vec::new();
        for plant in 0..3usize {
            let lexicon: Vec<String> = (0..20).map(|w| format!("plant{plant}word{w}")).collect();
            for _ in 0..40 {
                let len = 10 + next(7);
                let words: Vec<&str> = (0..len).map(|_| lexicon[next(20)].as_str()).collect();
                documents.push(doc(documents.len(), &words.join(" ")));
            }
        }
        documents
    }

    #[test]
    fn fit_recovers_planted_clusters() {
        let documents = planted_corpus();
        let params = FitParams {
            n_components: 5,
            min_cluster_size: 10,
            min_samples: 5,
            ..Default::default()
        };
        let model = fit(documents, &EmbedderConfig::default(), &params).unwrap();
        assert!(model.num_topics() >= 3, "got {} topics", model.num_topics());

        // Purity: within each discovered topic, one plant dominates.
        let mut agree = 0usize;
        let mut clustered = 0usize;
        for topic in &model.topics {
            let mut counts = [0usize; 3];
            for &doc_id in &topic.member_doc_ids {
                counts[doc_id / 40] += 1;
            }
            agree += counts.iter().max().unwrap();
            clustered += topic.member_doc_ids.len();
        }
        assert!(clustered > 0);
        let purity = agree as f64 / clustered as f64;
        assert!(purity >= 0.9, "purity {purity}");

        // Each planted vocabulary dominates some topic's top words.
        for plant in 0..3 {
            let marker = format!("plant{plant}");
            let dominated = model.topics.iter().any(|t| {
                let words = t.words();
                !words.is_empty()
                    && words.iter().filter(|w| w.starts_with(&marker)).count() * 2 > words.len()
            });
            assert!(dominated, "no topic dominated by plant {plant}");
        }
        model.validate().unwrap();
    }

    #[test]
    fn fit_requires_min_cluster_size_documents() {
        let documents: Vec<Document> = (0..5).map(|i| doc(i, "few docs here")).collect();
        let params = FitParams::default(); // min_cluster_size 10
        let err = fit(documents, &EmbedderConfig::default(), &params).unwrap_err();
        assert!(matches!(err, Error::Contract(_)), "{err}");
    }

    #[test]
    fn fit_is_deterministic() {
        let params = FitParams {
            n_components: 3,
            min_cluster_size: 10,
            min_samples: 5,
            ..Default::default()
        };
        let a = fit(planted_corpus(), &EmbedderConfig::default(), &params).unwrap();
        let b = fit(planted_corpus(), &EmbedderConfig::default(), &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn components_beyond_embedding_dim_fail_in_reduce_stage() {
        let documents: Vec<Document> = (0..12).map(|i| doc(i, "some words here")).collect();
        let params = FitParams {
            n_components: 10,
            min_cluster_size: 2,
            min_samples: 2,
            ..Default::default()
        };
        let embedder = EmbedderConfig::lexical(4, 0);
        let err = fit(documents, &embedder, &params).unwrap_err();
        assert!(err.to_string().contains("reduce stage"), "{err}");
        assert!(err.to_string().contains("exceeds"), "{err}");
    }

    #[test]
    fn stage_errors_name_the_stage() {
        let documents: Vec<Document> = (0..12).map(|i| doc(i, "????")).collect();
        // Everything embeds (tokens exist) but the vocabulary tokenizer
        // strips pure punctuation, so representation building fails.
        let params = FitParams {
            n_components: 2,
            min_cluster_size: 2,
            min_samples: 2,
            ..Default::default()
        };
        let err = fit(documents, &EmbedderConfig::default(), &params).unwrap_err();
        assert!(err.to_string().contains("ctfidf stage"), "{err}");
    }
}
