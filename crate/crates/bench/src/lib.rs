//! Deterministic workloads shared by the benchmarks.

use std::collections::BTreeMap;

use orgmem_core::doc_store::RepoSnapshot;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const VOCAB: &[&str] = &[
    "badge",
    "printer",
    "toner",
    "freezer",
    "sample",
    "booking",
    "calendar",
    "seminar",
    "thesis",
    "draft",
    "server",
    "cluster",
    "quota",
    "backup",
    "visitor",
    "parking",
    "permit",
    "reimbursement",
    "travel",
    "receipt",
    "safety",
    "goggles",
    "gloves",
    "waste",
    "chemical",
    "microscope",
    "tracker",
    "camera",
    "budget",
    "grant",
    "meeting",
    "weekly",
    "friday",
    "room",
    "office",
    "keys",
    "laptop",
    "monitor",
    "stipend",
    "holiday",
];

pub fn words(rng: &mut impl Rng, n: usize) -> String {
    (0..n)
        .map(|_| *VOCAB.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

/// A repository of `files` markdown files with `sections` headed
/// paragraphs each.
pub fn corpus(files: usize, sections: usize, seed: u64) -> RepoSnapshot {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut map = BTreeMap::new();
    for f in 0..files {
        let mut body = format!("# Document {f}\n\n");
        for s in 0..sections {
            let n = rng.random_range(8..40);
            body.push_str(&format!("## Section {s}\n\n{}.\n\n", words(&mut rng, n)));
        }
        map.insert(format!("doc{f:02}.md"), body);
    }
    RepoSnapshot {
        revision: 0,
        files: map,
        history: Vec::new(),
    }
}

pub fn queries(count: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(3..9);
            format!("where is the {}?", words(&mut rng, n))
        })
        .collect()
}

/// `text` with roughly one word in `every` replaced.
pub fn perturb(text: &str, every: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    text.split(' ')
        .map(|w| {
            if rng.random_range(0..every) == 0 {
                VOCAB.choose(&mut rng).unwrap().to_string()
            } else {
                w.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}
