//! Class-based TF-IDF: all documents in a cluster are concatenated into one
//! pseudo-document and term importance is computed per cluster as
//! `W(t,c) = tf(t,c) * ln(1 + A / f(t))`, where `tf(t,c)` counts `t` in
//! cluster `c`, `f(t)` counts `t` across all clusters, and `A` is the
//! average token count per cluster. Noise documents are excluded.

use std::collections::HashMap;

use crate::error::{Error, Result};

use super::hdbscan::ClusterAssignment;

/// Sorted term list with a reverse index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    term_index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_sorted_terms(terms: Vec<String>) -> Self {
        let term_index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self { terms, term_index }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.term_index.get(term).copied()
    }
}

const MAX_TOKEN_CHARS: usize = 40;

/// Vocabulary tokenizer: lowercase, strip edge punctuation, split on
/// whitespace. Stopwords are deliberately kept — topic words like "my" and
/// "and" are meaningful here — and over-long tokens are dropped.
pub fn vocab_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    crate::segment::norm_tokens(text).filter(|t| t.chars().count() <= MAX_TOKEN_CHARS)
}

/// Dense row-major `num_clusters x vocab` weight matrix in f64.
#[derive(Debug, Clone, PartialEq)]
pub struct CtfidfMatrix {
    num_clusters: usize,
    vocab_size: usize,
    weights: Vec<f64>,
}

impl CtfidfMatrix {
    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn row(&self, cluster: usize) -> &[f64] {
        &self.weights[cluster * self.vocab_size..(cluster + 1) * self.vocab_size]
    }
}

/// Term counts per cluster plus the corpus-level tallies the weighting
/// needs. Kept separate from the weights so topic merging can add tf rows
/// and re-derive weights under the new cluster count.
pub struct TermCounts {
    pub vocabulary: Vocabulary,
    /// Row-major `num_clusters x vocab` term counts.
    pub tf: Vec<u64>,
    /// Total count of each term across all clusters.
    pub term_totals: Vec<u64>,
    /// Total token count over all clusters.
    pub total_tokens: u64,
    pub num_clusters: usize,
}

impl TermCounts {
    pub fn tally(texts: &[&str], labels: &ClusterAssignment) -> Result<Self> {
        if labels.labels.len() != texts.len() {
            return Err(Error::Contract(format!(
                "{} labels for {} documents",
                labels.labels.len(),
                texts.len()
            )));
        }
        let k = labels.num_clusters;
        if k == 0 {
            return Err(Error::Contract(
                "c-TF-IDF requires at least one non-noise cluster".into(),
            ));
        }

        let mut term_set: Vec<String> = Vec::new();
        {
            let mut seen = std::collections::HashSet::new();
            for (text, &label) in texts.iter().zip(&labels.labels) {
                if label < 0 {
                    continue;
                }
                for token in vocab_tokens(text) {
                    if seen.insert(token.clone()) {
                        term_set.push(token);
                    }
                }
            }
        }
        term_set.sort();
        let vocabulary = Vocabulary::from_sorted_terms(term_set);
        if vocabulary.is_empty() {
            return Err(Error::Validation(
                "empty vocabulary: no clustered document has any usable token".into(),
            ));
        }

        let v = vocabulary.len();
        let mut tf = vec![0u64; k * v];
        let mut term_totals = vec![0u64; v];
        let mut total_tokens = 0u64;
        for (text, &label) in texts.iter().zip(&labels.labels) {
            if label < 0 {
                continue;
            }
            let row = &mut tf[label as usize * v..(label as usize + 1) * v];
            for token in vocab_tokens(text) {
                let idx = vocabulary.index_of(&token).expect("token in vocabulary");
                row[idx] += 1;
                term_totals[idx] += 1;
                total_tokens += 1;
            }
        }

        Ok(Self {
            vocabulary,
            tf,
            term_totals,
            total_tokens,
            num_clusters: k,
        })
    }

    /// `W(t,c) = tf(t,c) * ln(1 + A / f(t))` over the current clusters.
    pub fn weights(&self) -> CtfidfMatrix {
        let v = self.vocabulary.len();
        let avg_tokens_per_cluster = self.total_tokens as f64 / self.num_clusters as f64;
        let idf: Vec<f64> = self
            .term_totals
            .iter()
            .map(|&f| {
                if f == 0 {
                    0.0
                } else {
                    (1.0 + avg_tokens_per_cluster / f as f64).ln()
                }
            })
            .collect();
        let mut weights = vec![0.0f64; self.num_clusters * v];
        for c in 0..self.num_clusters {
            for t in 0..v {
                weights[c * v + t] = self.tf[c * v + t] as f64 * idf[t];
            }
        }
        CtfidfMatrix {
            num_clusters: self.num_clusters,
            vocab_size: v,
            weights,
        }
    }

    /// Fold cluster `src` into cluster `dst` (tf rows add; totals are
    /// unchanged) and drop the `src` row.
    pub fn merge_clusters(&mut self, dst: usize, src: usize) {
        assert!(dst < src && src < self.num_clusters);
        let v = self.vocabulary.len();
        for t in 0..v {
            self.tf[dst * v + t] += self.tf[src * v + t];
        }
        self.tf.drain(src * v..(src + 1) * v);
        self.num_clusters -= 1;
    }
}

/// Convenience wrapper for the single-shot computation.
pub fn ctfidf(texts: &[&str], labels: &ClusterAssignment) -> Result<(Vocabulary, CtfidfMatrix)> {
    let counts = TermCounts::tally(texts, labels)?;
    let weights = counts.weights();
    Ok((counts.vocabulary, weights))
}

/// The `min(k, positive-weight terms)` heaviest terms of one cluster row,
/// weight-descending, ties broken lexicographically.
pub fn top_words(vocabulary: &Vocabulary, row: &[f64], k: usize) -> Vec<(String, f64)> {
    let mut scored: Vec<(usize, f64)> = row
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 0.0)
        .map(|(i, w)| (i, *w))
        .collect();
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then(vocabulary.term(a.0).cmp(vocabulary.term(b.0)))
    });
    scored
        .into_iter()
        .take(k)
        .map(|(i, w)| (vocabulary.term(i).to_string(), w))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn assignment(labels: Vec<i32>) -> ClusterAssignment {
        let num_clusters = labels
            .iter()
            .filter(|&&l| l >= 0)
            .map(|&l| l + 1)
            .max()
            .unwrap_or(0) as usize;
        ClusterAssignment {
            labels,
            num_clusters,
        }
    }

    /// Independent brute-force oracle: string-keyed maps, no shared code
    /// with the implementation above.
    fn brute_force_ctfidf(texts: &[&str], labels: &[i32]) -> HashMap<(String, i32), f64> {
        let clusters: Vec<i32> = {
            let mut c: Vec<i32> = labels.iter().copied().filter(|&l| l >= 0).collect();
            c.sort();
            c.dedup();
            c
        };
        let tokenize = |text: &str| -> Vec<String> {
            text.split_whitespace()
                .map(|t| {
                    t.trim_matches(|c: char| !c.is_alphanumeric())
                        .to_lowercase()
                })
                .filter(|t| !t.is_empty() && t.chars().count() <= 40)
                .collect()
        };
        let mut tf: HashMap<(String, i32), f64> = HashMap::new();
        let mut f: HashMap<String, f64> = HashMap::new();
        let mut total = 0.0f64;
        for (text, &label) in texts.iter().zip(labels) {
            if label < 0 {
                continue;
            }
            for token in tokenize(text) {
                *tf.entry((token.clone(), label)).or_insert(0.0) += 1.0;
                *f.entry(token).or_insert(0.0) += 1.0;
                total += 1.0;
            }
        }
        let a = total / clusters.len() as f64;
        let mut out = HashMap::new();
        for ((term, cluster), count) in tf {
            let weight = count * (1.0 + a / f[&term]).ln();
            out.insert((term, cluster), weight);
        }
        out
    }

    #[test]
    fn worked_two_cluster_example_matches_oracle() {
        // Two pseudo-documents: c0 = "book a table book" (4 tokens),
        // c1 = "feeling sick today" (3 tokens). A = 7/2 = 3.5, f(book) = 2,
        // so W(book, c0) = 2 * ln(1 + 3.5/2) = 2 * ln(2.75).
        let texts = ["book a table book", "feeling sick today"];
        let labels = assignment(vec![0, 1]);
        let (vocab, weights) = ctfidf(&texts, &labels).unwrap();
        let book = vocab.index_of("book").unwrap();
        let expected = 2.0 * (1.0 + 3.5 / 2.0_f64).ln();
        assert!((expected - 2.0232018).abs() < 1e-6);
        assert!(
            (weights.row(0)[book] - expected).abs() < 1e-12,
            "got {}, expected {expected}",
            weights.row(0)[book]
        );
        // And the independent oracle agrees.
        let oracle = brute_force_ctfidf(&texts, &labels.labels);
        assert!((oracle[&("book".to_string(), 0)] - expected).abs() < 1e-12);
    }

    #[test]
    fn absent_term_weighs_zero_in_other_clusters() {
        let texts = ["unique word", "other things entirely"];
        let labels = assignment(vec![0, 1]);
        let (vocab, weights) = ctfidf(&texts, &labels).unwrap();
        let unique = vocab.index_of("unique").unwrap();
        assert_eq!(weights.row(1)[unique], 0.0);
        assert!(weights.row(0)[unique] > 0.0);
    }

    #[test]
    fn single_cluster_weights_strictly_positive() {
        let texts = ["all these words", "are one single cluster"];
        let labels = assignment(vec![0, 0]);
        let (vocab, weights) = ctfidf(&texts, &labels).unwrap();
        for t in 0..vocab.len() {
            assert!(weights.row(0)[t] > 0.0, "term {:?}", vocab.term(t));
        }
    }

    #[test]
    fn matches_brute_force_on_random_corpora() {
        // Seeded corpus generator: up to 20 docs over a vocabulary of 50.
        let mut state = 0xdeadbeefcafef00du64;
        let mut next = move |bound: usize| -> usize {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % bound as u64) as usize
        };
        let lexicon: Vec<String> = (0..50).map(|i| format!("w{i}")).collect();
        for _case in 0..50 {
            let num_docs = 2 + next(19);
            let clusters = 1 + next(4);
            let mut texts_owned = Vec::new();
            let mut labels = Vec::new();
            for d in 0..num_docs {
                let len = 1 + next(12);
                let words: Vec<&str> = (0..len).map(|_| lexicon[next(50)].as_str()).collect();
                texts_owned.push(words.join(" "));
                // Ensure each cluster id below `clusters` appears at least once.
                labels.push(if d < clusters {
                    d as i32
                } else {
                    next(clusters + 1) as i32 - 1
                });
            }
            let texts: Vec<&str> = texts_owned.iter().map(String::as_str).collect();
            let labels = assignment(labels);
            let (vocab, weights) = ctfidf(&texts, &labels).unwrap();
            let oracle = brute_force_ctfidf(&texts, &labels.labels);
            for c in 0..labels.num_clusters {
                for t in 0..vocab.len() {
                    let ours = weights.row(c)[t];
                    let theirs = oracle
                        .get(&(vocab.term(t).to_string(), c as i32))
                        .copied()
                        .unwrap_or(0.0);
                    let scale = theirs.abs().max(1e-12);
                    assert!(
                        (ours - theirs).abs() / scale <= 1e-9,
                        "term {:?} cluster {c}: {ours} vs oracle {theirs}",
                        vocab.term(t)
                    );
                }
            }
        }
    }

    #[test]
    fn noise_documents_are_excluded() {
        let texts = ["real cluster text", "noise junk words"];
        let labels = ClusterAssignment {
            labels: vec![0, -1],
            num_clusters: 1,
        };
        let (vocab, _) = ctfidf(&texts, &labels).unwrap();
        assert!(vocab.index_of("junk").is_none());
        assert!(vocab.index_of("real").is_some());
    }

    #[test]
    fn no_clusters_is_contract_error() {
        let texts = ["a", "b"];
        let labels = ClusterAssignment {
            labels: vec![-1, -1],
            num_clusters: 0,
        };
        assert!(matches!(ctfidf(&texts, &labels), Err(Error::Contract(_))));
    }

    #[test]
    fn punctuation_only_documents_yield_empty_vocabulary_error() {
        let texts = ["?!", "..."];
        let labels = assignment(vec![0, 0]);
        assert!(matches!(ctfidf(&texts, &labels), Err(Error::Validation(_))));
    }

    #[test]
    fn top_words_caps_and_breaks_ties_lexicographically() {
        let vocab =
            Vocabulary::from_sorted_terms(vec!["a".into(), "b".into(), "c".into(), "d".into()]);
        // Ties on 2.0 resolve alphabetically; zero weights never appear.
        let row = [2.0, 2.0, 1.0, 0.0];
        let picked = top_words(&vocab, &row, 2);
        assert_eq!(
            picked.iter().map(|(t, _)| t.as_str()).collect::<Vec<_>>(),
            vec!["a", "b"]
        );
        let all = top_words(&vocab, &row, 10);
        assert_eq!(all.len(), 3, "only positive-weight terms count");
    }

    #[test]
    fn stopwords_survive_vocabulary() {
        let texts = ["my friend and we are willing"];
        let labels = assignment(vec![0]);
        let (vocab, _) = ctfidf(&texts, &labels).unwrap();
        for word in ["my", "and", "we", "are"] {
            assert!(
                vocab.index_of(word).is_some(),
                "stopword {word:?} must stay"
            );
        }
    }
}
