//! Shared fixtures for the integration suites.
#![allow(dead_code)] // each test target uses a different subset

use std::io::Write;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Names of the planted lexicons: `plant{p}word{w}` for w in 0..20.
pub fn planted_word(plant: usize, word: usize) -> String {
    format!("plant{plant}word{word}")
}

/// One synthetic document text drawn from a single planted lexicon. Word 0
/// opens every document, so it is always the lexicon's strongest topic word
/// and usable as a retrieval probe.
pub fn planted_text(rng: &mut ChaCha8Rng, plant: usize) -> String {
    let len = rng.random_range(10..=16);
    let mut words = vec![planted_word(plant, 0)];
    words.extend((1..len).map(|_| planted_word(plant, rng.random_range(0..20))));
    words.join(" ")
}

/// Write a normalized JSON-lines corpus of `docs_per_plant * plants`
/// single-turn dialogues cycling through the planted lexicons. Returns the
/// plant of each turn in dialogue order.
pub fn write_planted_corpus(
    path: &Path,
    plants: usize,
    docs_per_plant: usize,
    seed: u64,
) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = plants * docs_per_plant;
    let mut file = std::fs::File::create(path).unwrap();
    let mut plant_of_doc = Vec::with_capacity(total);
    for d in 0..total {
        let plant = d % plants;
        plant_of_doc.push(plant);
        let text = planted_text(&mut rng, plant);
        writeln!(
            file,
            "{{\"dialogue_id\":\"dlg{d:05}\",\"turns\":[{{\"speaker\":\"USER\",\"turn_index\":0,\"text\":\"{text}\",\"annotations\":[]}}]}}"
        )
        .unwrap();
    }
    plant_of_doc
}

/// Standard-normal sample via Box-Muller, driven by the given generator.
pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
