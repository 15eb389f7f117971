//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured runtime (visible with `--nocapture`). Criteria cover the
//! worked micro-example, oracle equivalence, clustering recovery, merge
//! semantics, end-to-end planted recovery, determinism, scale, reporting,
//! and loader format conformance.

mod common;

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use prospect::embed::{cosine_similarity_f64, embed_texts, EmbedderConfig};
use prospect::prospect::{query, KeywordSet, ProspectHit, SequenceRef};
use prospect::report::{render_table, turn_distribution, TableFormat};
use prospect::segment::{
    build_documents, default_stopwords, select_odd_candidate, split_clauses, Document, Granularity,
    SegmentMode,
};
use prospect::topics::{
    cluster_density, ctfidf, fit, merge_topics, ClusterAssignment, FitParams, TermCounts,
    TopicModel,
};

fn finish(criterion: u32, budget: Duration, started: Instant, detail: &str) {
    let elapsed = started.elapsed();
    assert!(
        elapsed <= budget,
        "ACCEPTANCE {criterion} FAIL: took {elapsed:.2?}, budget {budget:.2?}"
    );
    println!("ACCEPTANCE {criterion} PASS ({elapsed:.2?}): {detail}");
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_prospect"))
}

fn run_ok(cmd: &mut Command) {
    let output = cmd.output().expect("spawn prospect binary");
    assert!(
        output.status.success(),
        "command failed with {:?}\nstderr: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stderr)
    );
}

// ---------------------------------------------------------------------------
// 1. Worked-example fidelity
// ---------------------------------------------------------------------------

#[test]
fn acceptance_1_worked_example_fidelity() {
    let started = Instant::now();
    let utterance = "Find me a comedy to watch right now. I'm super bored.";
    let annotation = "movie, play movie, genre comedy";

    let clauses = split_clauses(utterance);
    assert_eq!(
        clauses,
        vec!["Find me a comedy", "to watch right now", "I'm super bored"],
        "clause list mismatch"
    );

    let picked = select_odd_candidate(
        &clauses,
        annotation,
        &EmbedderConfig::default(),
        default_stopwords(),
    )
    .unwrap();
    assert_eq!(
        picked.as_deref(),
        Some("I'm super bored"),
        "filtered candidate mismatch"
    );

    finish(
        1,
        Duration::from_secs(1),
        started,
        "clause list and candidate match exactly",
    );
}

// ---------------------------------------------------------------------------
// 2. c-TF-IDF oracle equivalence
// ---------------------------------------------------------------------------

/// Brute-force implementation of W(t,c) = tf * ln(1 + A/f), written against
/// string-keyed maps with no code shared with the library path.
fn oracle_ctfidf(texts: &[String], labels: &[i32]) -> HashMap<(String, i32), f64> {
    let tokenize = |text: &str| -> Vec<String> {
        text.split_whitespace()
            .map(|t| {
                t.trim_matches(|c: char| !c.is_alphanumeric())
                    .to_lowercase()
            })
            .filter(|t| !t.is_empty() && t.chars().count() <= 40)
            .collect()
    };
    let mut cluster_ids: Vec<i32> = labels.iter().copied().filter(|&l| l >= 0).collect();
    cluster_ids.sort();
    cluster_ids.dedup();
    let mut tf: HashMap<(String, i32), f64> = HashMap::new();
    let mut totals: HashMap<String, f64> = HashMap::new();
    let mut token_count = 0.0f64;
    for (text, &label) in texts.iter().zip(labels) {
        if label < 0 {
            continue;
        }
        for token in tokenize(text) {
            *tf.entry((token.clone(), label)).or_insert(0.0) += 1.0;
            *totals.entry(token).or_insert(0.0) += 1.0;
            token_count += 1.0;
        }
    }
    let average_per_cluster = token_count / cluster_ids.len() as f64;
    tf.into_iter()
        .map(|((term, cluster), count)| {
            let weight = count * (1.0 + average_per_cluster / totals[&term]).ln();
            ((term, cluster), weight)
        })
        .collect()
}

#[test]
fn acceptance_2_ctfidf_matches_brute_force_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let lexicon: Vec<String> = (0..50).map(|i| format!("word{i}")).collect();

    for case in 0..50 {
        let num_docs = rng.random_range(2..=20);
        let num_clusters = rng.random_range(1..=4.min(num_docs));
        let mut texts = Vec::with_capacity(num_docs);
        let mut labels = Vec::with_capacity(num_docs);
        for d in 0..num_docs {
            let len = rng.random_range(1..=12);
            let words: Vec<&str> = (0..len)
                .map(|_| lexicon[rng.random_range(0..lexicon.len())].as_str())
                .collect();
            texts.push(words.join(" "));
            // Guarantee every cluster id is used; allow some noise docs.
            let label = if d < num_clusters {
                d as i32
            } else {
                rng.random_range(-1..num_clusters as i32)
            };
            labels.push(label);
        }

        let text_refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let assignment = ClusterAssignment {
            labels: labels.clone(),
            num_clusters,
        };
        let (vocabulary, weights) = ctfidf(&text_refs, &assignment).unwrap();
        let oracle = oracle_ctfidf(&texts, &labels);

        for c in 0..num_clusters {
            for t in 0..vocabulary.len() {
                let ours = weights.row(c)[t];
                let theirs = oracle
                    .get(&(vocabulary.term(t).to_string(), c as i32))
                    .copied()
                    .unwrap_or(0.0);
                let within = if theirs == 0.0 {
                    ours == 0.0
                } else {
                    (ours - theirs).abs() / theirs.abs() <= 1e-9
                };
                assert!(
                    within,
                    "case {case}, term {:?}, cluster {c}: {ours} vs oracle {theirs}",
                    vocabulary.term(t)
                );
            }
        }
    }
    finish(
        2,
        Duration::from_secs(5),
        started,
        "50 random corpora match the oracle within 1e-9",
    );
}

// ---------------------------------------------------------------------------
// 3. Clustering recovery
// ---------------------------------------------------------------------------

#[test]
fn acceptance_3_two_gaussian_blobs_recovered_over_20_seeds() {
    let started = Instant::now();
    const DIM: usize = 5;
    const PER_BLOB: usize = 50;

    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Unit-sigma blobs with centers 10 sigma apart.
        let mut data = Vec::with_capacity(2 * PER_BLOB * DIM);
        let mut truth = Vec::with_capacity(2 * PER_BLOB);
        for blob in 0..2 {
            for _ in 0..PER_BLOB {
                for d in 0..DIM {
                    let center = if blob == 1 && d == 0 { 10.0 } else { 0.0 };
                    data.push((center + common::gaussian(&mut rng)) as f32);
                }
                truth.push(blob);
            }
        }
        let matrix = prospect::embed::EmbeddingMatrix::new(2 * PER_BLOB, DIM, data).unwrap();
        let assignment = cluster_density(&matrix, 10, 5).unwrap();

        assert_eq!(
            assignment.num_clusters, 2,
            "seed {seed}: wrong cluster count"
        );
        let noise = assignment.noise_count();
        assert!(
            noise * 10 <= 2 * PER_BLOB,
            "seed {seed}: {noise} noise points exceeds 10%"
        );
        let mut agree = 0usize;
        let mut clustered = 0usize;
        for label in 0..2i32 {
            let mut counts = [0usize; 2];
            for (i, &l) in assignment.labels.iter().enumerate() {
                if l == label {
                    counts[truth[i]] += 1;
                }
            }
            agree += counts.iter().max().unwrap();
            clustered += counts.iter().sum::<usize>();
        }
        let purity = agree as f64 / clustered as f64;
        assert!(purity >= 0.95, "seed {seed}: purity {purity}");
    }
    finish(
        3,
        Duration::from_secs(10),
        started,
        "2 clusters, >=95% purity, <=10% noise on all 20 seeds",
    );
}

// ---------------------------------------------------------------------------
// 4. Merge semantics
// ---------------------------------------------------------------------------

fn merge_model(texts: &[&str], labels: Vec<i32>) -> TopicModel {
    let documents: Vec<Document> = texts
        .iter()
        .enumerate()
        .map(|(i, t)| Document {
            doc_id: i,
            text: t.to_string(),
            dialogue_id: format!("d{i}"),
            turn_index: 0,
            speaker: prospect::corpus::Speaker::User,
            granularity: Granularity::Utterance,
        })
        .collect();
    let embeddings = embed_texts(texts, &EmbedderConfig::default()).unwrap();
    let num_clusters = labels.iter().copied().max().unwrap_or(-1) + 1;
    let assignment = ClusterAssignment {
        labels,
        num_clusters: num_clusters as usize,
    };
    let params = FitParams {
        min_cluster_size: 2,
        min_samples: 2,
        n_components: 2,
        ..Default::default()
    };
    TopicModel::from_parts(
        documents,
        embeddings,
        assignment,
        params,
        EmbedderConfig::default(),
    )
    .unwrap()
}

#[test]
#[allow(clippy::neg_cmp_op_on_partial_ord)] // the negated form IS the merge predicate under test
fn acceptance_4_merge_semantics() {
    let started = Instant::now();

    // Duplicated representations (similarity 1) merge, K drops by exactly 1.
    let duplicated = merge_model(
        &["alpha beta", "alpha beta", "alpha beta", "alpha beta"],
        vec![0, 0, 1, 1],
    );
    let merged = merge_topics(&duplicated, 0.915).unwrap();
    assert_eq!(
        duplicated.num_topics() - merged.num_topics(),
        1,
        "duplicate pair must merge once"
    );

    // A pair whose computed similarity IS the threshold must not merge:
    // strictly-exceeds semantics at the exact boundary.
    let boundary = merge_model(&["x x y", "y x x", "x y y", "y y x"], vec![0, 0, 1, 1]);
    let texts: Vec<&str> = boundary.documents.iter().map(|d| d.text.as_str()).collect();
    let weights = TermCounts::tally(&texts, &boundary.assignment)
        .unwrap()
        .weights();
    let boundary_sim = cosine_similarity_f64(weights.row(0), weights.row(1));
    let at_boundary = merge_topics(&boundary, boundary_sim).unwrap();
    assert_eq!(
        at_boundary.num_topics(),
        2,
        "pair exactly at threshold must not merge"
    );
    let below_boundary = merge_topics(&boundary, boundary_sim - 1e-12).unwrap();
    assert_eq!(
        below_boundary.num_topics(),
        1,
        "pair above threshold must merge"
    );

    // The strict comparison also holds at exactly 0.915: walk the second
    // vector by ulps until the full cosine computation returns the f64
    // nearest 0.915, then check the merge predicate.
    let threshold = 0.915f64;
    let mut z = (1.0 - threshold * threshold).sqrt();
    let mut constructed = None;
    for _ in 0..64 {
        let sim = cosine_similarity_f64(&[1.0, 0.0], &[threshold, z]);
        match sim.partial_cmp(&threshold).unwrap() {
            std::cmp::Ordering::Equal => {
                constructed = Some(sim);
                break;
            }
            std::cmp::Ordering::Less => z = f64::from_bits(z.to_bits() - 1),
            std::cmp::Ordering::Greater => z = f64::from_bits(z.to_bits() + 1),
        }
    }
    let sim = constructed.expect("an exact-similarity construction exists within a few ulps");
    assert_eq!(
        sim, threshold,
        "construction yields similarity exactly 0.915"
    );
    assert!(
        !(sim > threshold),
        "strictly-exceeds predicate must not fire at 0.915"
    );

    // After merging, no recomputed pair exceeds the threshold.
    let mixed = merge_model(
        &[
            "red green blue",
            "red green blue",
            "red blue green shade",
            "red green blue tint",
            "cats dogs pets",
            "dogs cats pets",
        ],
        vec![0, 0, 1, 1, 2, 2],
    );
    let settled = merge_topics(&mixed, 0.915).unwrap();
    let texts: Vec<&str> = settled.documents.iter().map(|d| d.text.as_str()).collect();
    let weights = TermCounts::tally(&texts, &settled.assignment)
        .unwrap()
        .weights();
    for i in 0..settled.num_topics() {
        for j in i + 1..settled.num_topics() {
            let sim = cosine_similarity_f64(weights.row(i), weights.row(j));
            assert!(sim <= 0.915, "post-merge pair ({i},{j}) at {sim}");
        }
    }

    finish(
        4,
        Duration::from_secs(1),
        started,
        "merge is strict at the boundary and idempotent after settling",
    );
}

// ---------------------------------------------------------------------------
// 5. End-to-end planted recovery
// ---------------------------------------------------------------------------

#[test]
fn acceptance_5_planted_recovery_through_build_and_query() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = dir.path().join("corpus.jsonl");
    let model_dir = dir.path().join("model");
    let hits_path = dir.path().join("hits.json");

    let plant_of_doc = common::write_planted_corpus(&corpus_path, 3, 40, 7);

    run_ok(
        bin()
            .arg("build")
            .arg("--corpus")
            .arg(&corpus_path)
            .arg("--mode")
            .arg("utterances")
            .arg("--out")
            .arg(&model_dir),
    );

    let keywords: Vec<String> = (0..3).map(|p| common::planted_word(p, 0)).collect();
    run_ok(
        bin()
            .arg("query")
            .arg("--model")
            .arg(&model_dir)
            .arg("--keywords")
            .arg(keywords.join(";"))
            .arg("--top-k")
            .arg("5")
            .arg("--out")
            .arg(&hits_path),
    );

    let hits: Vec<ProspectHit> =
        serde_json::from_str(&std::fs::read_to_string(&hits_path).unwrap()).unwrap();

    // Doc id -> plant, via the artifact's documents.jsonl (dialogue ids
    // encode the original order).
    let model = prospect::report::import_model(&model_dir).unwrap();
    let plant_of = |doc_id: usize| {
        plant_of_doc[model.documents[doc_id].dialogue_id[3..]
            .parse::<usize>()
            .unwrap()]
    };

    // Purity over all clustered documents.
    let mut agree = 0usize;
    let mut clustered = 0usize;
    for topic in &model.topics {
        let mut counts = [0usize; 3];
        for &doc_id in &topic.member_doc_ids {
            counts[plant_of(doc_id)] += 1;
        }
        agree += counts.iter().max().unwrap();
        clustered += topic.member_doc_ids.len();
    }
    let purity = agree as f64 / clustered as f64;
    assert!(purity >= 0.9, "topic purity {purity}");

    // For each planted keyword, the first-ranked topic is dominated by that
    // plant, in members and in top words.
    for (plant, keyword) in keywords.iter().enumerate() {
        let first = hits
            .iter()
            .find(|h| &h.keyword == keyword)
            .unwrap_or_else(|| panic!("no hits for {keyword}"));
        let topic = model.topic(first.topic_id).unwrap();
        let members_from_plant = topic
            .member_doc_ids
            .iter()
            .filter(|&&d| plant_of(d) == plant)
            .count();
        assert!(
            members_from_plant * 2 > topic.member_doc_ids.len(),
            "keyword {keyword}: top-ranked topic {} not dominated by plant {plant}",
            first.topic_id
        );
        let marker = format!("plant{plant}");
        let planted_words = first
            .topic_words
            .iter()
            .filter(|w| w.starts_with(&marker))
            .count();
        assert!(
            planted_words * 2 > first.topic_words.len(),
            "keyword {keyword}: top words {:?} not dominated by plant {plant}",
            first.topic_words
        );
    }

    finish(
        5,
        Duration::from_secs(30),
        started,
        "each planted vocabulary dominates its first-ranked topic, purity >= 0.9",
    );
}

// ---------------------------------------------------------------------------
// 6. Determinism
// ---------------------------------------------------------------------------

#[test]
fn acceptance_6_byte_identical_artifacts_at_5000_documents() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = dir.path().join("corpus.jsonl");
    common::write_planted_corpus(&corpus_path, 5, 1000, 11);

    let build = |out: &Path| {
        run_ok(
            bin()
                .arg("build")
                .arg("--corpus")
                .arg(&corpus_path)
                .arg("--seed")
                .arg("1234")
                .arg("--dim")
                .arg("64")
                .arg("--out")
                .arg(out),
        );
    };
    let out_a = dir.path().join("model_a");
    let out_b = dir.path().join("model_b");
    build(&out_a);
    build(&out_b);

    for name in [
        "embeddings.bin",
        "assignments.jsonl",
        "topics.json",
        "documents.jsonl",
        "manifest.json",
    ] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical builds");
    }
    finish(
        6,
        Duration::from_secs(60),
        started,
        "two seeded builds of 5000 documents are byte-identical",
    );
}

// ---------------------------------------------------------------------------
// 7. Scale sanity
// ---------------------------------------------------------------------------

#[cfg(target_os = "linux")]
fn peak_memory_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

#[cfg(not(target_os = "linux"))]
fn peak_memory_bytes() -> Option<u64> {
    None
}

#[test]
fn acceptance_7_ten_thousand_documents_within_time_and_memory() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let documents: Vec<Document> = (0..10_000)
        .map(|i| Document {
            doc_id: i,
            text: common::planted_text(&mut rng, i % 8),
            dialogue_id: format!("dlg{i:05}"),
            turn_index: 0,
            speaker: prospect::corpus::Speaker::User,
            granularity: Granularity::Utterance,
        })
        .collect();

    let embedder = EmbedderConfig::lexical(64, 0);
    let model = fit(documents, &embedder, &FitParams::default()).unwrap();
    assert!(model.num_topics() >= 1);

    let dir = tempfile::tempdir().unwrap();
    prospect::report::export_model(&model, dir.path()).unwrap();
    let hits = query(&model, &KeywordSet::default(), &embedder, 5).unwrap();
    assert!(!hits.is_empty());

    if let Some(peak) = peak_memory_bytes() {
        assert!(
            peak < 2 * 1024 * 1024 * 1024,
            "peak memory {} MiB exceeds 2 GiB",
            peak / (1024 * 1024)
        );
    }
    finish(
        7,
        Duration::from_secs(300),
        started,
        "full pipeline over 10,000 documents inside budget",
    );
}

// ---------------------------------------------------------------------------
// 8. Reporting
// ---------------------------------------------------------------------------

#[test]
fn acceptance_8_turn_distribution_and_csv_round_trip() {
    let started = Instant::now();
    let sequence = |turn: usize| SequenceRef {
        text: format!("sequence at turn {turn}, with a comma"),
        dialogue_id: format!("d{turn}"),
        turn_index: turn,
        speaker: prospect::corpus::Speaker::User,
    };
    let hits = vec![
        ProspectHit {
            keyword: "k1".into(),
            topic_id: 0,
            score: 0.7,
            topic_words: vec!["w".into()],
            sequences: vec![sequence(0), sequence(0), sequence(0), sequence(1)],
        },
        ProspectHit {
            keyword: "k2".into(),
            topic_id: 1,
            score: 0.4,
            topic_words: vec!["v".into()],
            sequences: vec![sequence(1), sequence(4), sequence(9)],
        },
    ];

    let distribution = turn_distribution(&hits);
    let expected: std::collections::BTreeMap<usize, usize> =
        [(0, 3), (1, 2), (4, 1), (9, 1)].into_iter().collect();
    assert_eq!(distribution, expected);

    // Distribution total equals rendered data-row count.
    let csv = render_table(&hits, TableFormat::Csv);
    assert_eq!(
        csv.lines().count() - 1,
        distribution.values().sum::<usize>()
    );

    // Round trip through an independent RFC-4180 reader recovers every
    // field verbatim.
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    let mut rows = 0;
    for (record, hit_seq) in reader.records().zip(
        hits.iter()
            .flat_map(|h| h.sequences.iter().map(move |s| (h, s))),
    ) {
        let record = record.unwrap();
        let (hit, seq) = hit_seq;
        assert_eq!(&record[0], hit.keyword);
        assert_eq!(record[1].parse::<i32>().unwrap(), hit.topic_id);
        assert_eq!(&record[2], seq.text);
        assert_eq!(record[3].parse::<usize>().unwrap(), seq.turn_index);
        assert_eq!(&record[4], seq.speaker.to_string());
        rows += 1;
    }
    assert_eq!(rows, 7);

    finish(
        8,
        Duration::from_secs(1),
        started,
        "distribution {0:3, 1:2, 4:1, 9:1} and lossless CSV",
    );
}

// ---------------------------------------------------------------------------
// 9. Format conformance
// ---------------------------------------------------------------------------

#[test]
fn acceptance_9_golden_fixture_conformance() {
    let started = Instant::now();
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let dir = tempfile::tempdir().unwrap();

    let sgd = prospect::corpus::load_sgd(&fixtures.join("sgd_mini")).unwrap();
    assert_eq!(sgd.dialogue_count(), 3);
    let sgd_out = dir.path().join("sgd.jsonl");
    prospect::corpus::write_normalized(&sgd, &sgd_out).unwrap();
    assert_eq!(
        std::fs::read(&sgd_out).unwrap(),
        std::fs::read(fixtures.join("golden_sgd.jsonl")).unwrap(),
        "normalized SGD export differs from golden"
    );

    let multiwoz = prospect::corpus::load_multiwoz(&fixtures.join("multiwoz_mini.json")).unwrap();
    assert_eq!(multiwoz.dialogue_count(), 3);
    let multiwoz_out = dir.path().join("multiwoz.jsonl");
    prospect::corpus::write_normalized(&multiwoz, &multiwoz_out).unwrap();
    assert_eq!(
        std::fs::read(&multiwoz_out).unwrap(),
        std::fs::read(fixtures.join("golden_multiwoz.jsonl")).unwrap(),
        "normalized MultiWOZ export differs from golden"
    );

    // The worked example survives the full segment path on the SGD fixture.
    let (docs, _) = prospect::segment::build_documents_with_stats(
        &sgd,
        SegmentMode::FilteredClauses,
        &EmbedderConfig::default(),
        default_stopwords(),
    )
    .unwrap();
    let worked = docs
        .iter()
        .find(|d| d.dialogue_id == "1_00000" && d.turn_index == 0)
        .expect("worked-example turn produces a document");
    assert_eq!(worked.text, "I'm super bored");
    assert_eq!(worked.granularity, Granularity::Clause);

    let _ = build_documents(
        &sgd,
        SegmentMode::Utterances,
        &EmbedderConfig::default(),
        default_stopwords(),
    )
    .unwrap();

    finish(
        9,
        Duration::from_secs(5),
        started,
        "golden SGD and MultiWOZ exports are byte-identical",
    );
}
