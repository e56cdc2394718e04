//! Independent oracles shared by integration and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use kgqa_core::elicit::{extract_concepts, ConceptMatchConfig};
use kgqa_core::kg::{KnowledgeGraph, Source, Triple};
use kgqa_core::text::tokenize;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Does a KG concept match any phrase of `phrases`? Scans the phrase set
/// directly rather than sliding windows over the token sequence.
pub fn concept_matches(concept: &str, phrases: &BTreeSet<String>, cfg: &ConceptMatchConfig) -> bool {
    if !cfg.relaxed {
        let norm = tokenize(concept).join(" ");
        return phrases.iter().any(|p| *p == norm);
    }
    let content: Vec<String> = tokenize(concept)
        .into_iter()
        .filter(|t| !cfg.stop_words.contains(t))
        .collect();
    if content.is_empty() {
        return false;
    }
    phrases.iter().any(|p| {
        let words: Vec<&str> = p.split(' ').collect();
        if content.len() <= 2 {
            content.iter().all(|c| words.contains(&c.as_str()))
        } else {
            // ordered containment
            let mut pos = 0;
            for c in &content {
                match words[pos..].iter().position(|w| w == c) {
                    Some(k) => pos += k + 1,
                    None => return false,
                }
            }
            true
        }
    })
}

/// Every triple id connecting question and option, by full scan.
pub fn brute_force_connecting(kg: &KnowledgeGraph, question: &str, option: &str, cfg: &ConceptMatchConfig) -> Vec<usize> {
    let q = extract_concepts(question, cfg);
    let o = extract_concepts(option, cfg);
    kg.triples()
        .iter()
        .enumerate()
        .filter(|(_, t)| {
            (concept_matches(&t.head, &q, cfg) && concept_matches(&t.tail, &o, cfg))
                || (concept_matches(&t.head, &o, cfg) && concept_matches(&t.tail, &q, cfg))
        })
        .map(|(i, _)| i)
        .collect()
}

pub const VOCAB: [&str; 14] = [
    "door", "bank", "red", "big", "revolving", "money", "house", "the", "of", "cat", "table", "kitchen", "knife", "a",
];
pub const RELATIONS: [&str; 4] = ["AtLocation", "RelatedTo", "IsA", "UsedFor"];

pub fn random_phrase(rng: &mut ChaCha8Rng, max_len: usize) -> String {
    let n = rng.gen_range(1..=max_len);
    (0..n).map(|_| *VOCAB.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// A random KG of at most `max_triples` triples over a small vocabulary.
pub fn random_kg(rng: &mut ChaCha8Rng, max_triples: usize) -> KnowledgeGraph {
    let n = rng.gen_range(0..=max_triples);
    let triples = (0..n)
        .map(|_| {
            let h = random_phrase(rng, 3);
            let t = random_phrase(rng, 3);
            let r = *RELATIONS.choose(rng).unwrap();
            Triple::new(&h, r, &t, 1.0, Source::ConceptNet).unwrap()
        })
        .collect();
    KnowledgeGraph::from_triples(triples)
}

pub fn qa_item(id: &str, question: &str, options: &[&str], gold: usize) -> kgqa_core::QAItem {
    kgqa_core::QAItem {
        id: id.into(),
        context: String::new(),
        question: question.into(),
        options: options.iter().map(|s| s.to_string()).collect(),
        answer_index: gold,
        meta: Default::default(),
    }
}

const ANIMALS: [&str; 10] = ["cat", "dog", "horse", "sheep", "goat", "mouse", "tiger", "camel", "whale", "eagle"];
const THINGS: [&str; 10] = ["spoon", "brick", "cloud", "lamp", "chair", "coin", "rope", "glass", "paper", "drum"];

/// 50 three-option items whose gold option is always an animal and whose
/// distractors never are, so an option-word unigram weight separates them.
pub fn separable_items() -> Vec<kgqa_core::QAItem> {
    (0..50)
        .map(|i| {
            let gold = i % 3;
            let mut opts = vec![THINGS[i % 10], THINGS[(i * 7 + 3) % 10]];
            if opts[0] == opts[1] {
                opts[1] = THINGS[(i + 1) % 10];
            }
            opts.insert(gold, ANIMALS[(i * 3) % 10]);
            qa_item(&format!("sep-{i}"), "Which one is alive?", &opts, gold)
        })
        .collect()
}

/// `n` sentences of 8 to 40 tokens drawn from a fixed word list.
pub fn generated_corpus(n: usize, seed: u64) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.gen_range(8..=40);
            (0..len).map(|_| VOCAB.choose(&mut rng).unwrap().to_string()).collect()
        })
        .collect()
}

/// Chi-square statistic of mask positions over fixed-length sentences.
pub fn position_chi_square(positions: &[Vec<usize>], len: usize) -> f64 {
    let mut hist = vec![0usize; len];
    for ps in positions {
        for &p in ps {
            hist[p] += 1;
        }
    }
    let total: usize = hist.iter().sum();
    let expected = total as f64 / len as f64;
    hist.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum()
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// 8 items over three question types with a known prediction vector.
/// Tally: AtLocation 2/3, UsedFor 1/3, IsA 2/2, typed total 5/8.
pub fn typed_fixture() -> (KnowledgeGraph, Vec<kgqa_core::QAItem>, Vec<usize>) {
    let kg = KnowledgeGraph::from_triples(vec![
        Triple::conceptnet("knife", "AtLocation", "kitchen"),
        Triple::conceptnet("book", "AtLocation", "library"),
        Triple::conceptnet("fish", "AtLocation", "ocean"),
        Triple::conceptnet("pen", "UsedFor", "writing"),
        Triple::conceptnet("car", "UsedFor", "driving"),
        Triple::conceptnet("bed", "UsedFor", "sleeping"),
        Triple::conceptnet("cat", "IsA", "animal"),
        Triple::conceptnet("rose", "IsA", "flower"),
    ]);
    let rows = [
        ("knife", "kitchen", "desert"),
        ("book", "library", "volcano"),
        ("fish", "ocean", "attic"),
        ("pen", "writing", "swimming"),
        ("car", "driving", "baking"),
        ("bed", "sleeping", "juggling"),
        ("cat", "animal", "mineral"),
        ("rose", "flower", "vehicle"),
    ];
    let items = rows
        .iter()
        .enumerate()
        .map(|(i, (concept, gold, other))| {
            let mut it = qa_item(&format!("typed-{i}"), &format!("Question about {concept}?"), &[gold, other], 0);
            it.meta.question_concept = Some(concept.to_string());
            it
        })
        .collect();
    let predictions = vec![0, 0, 1, 0, 1, 1, 0, 0];
    (kg, items, predictions)
}

/// (object, location, purpose) rows for the zero-shot fixture.
pub const OBJECTS: [(&str, &str, &str); 20] = [
    ("knife", "kitchen", "cutting"),
    ("pillow", "bedroom", "resting"),
    ("towel", "bathroom", "drying"),
    ("wrench", "garage", "repairing"),
    ("book", "library", "reading"),
    ("shovel", "garden", "digging"),
    ("stapler", "office", "stapling"),
    ("microscope", "laboratory", "magnifying"),
    ("saddle", "stable", "riding"),
    ("anchor", "harbor", "mooring"),
    ("chalk", "classroom", "writing"),
    ("tent", "campsite", "camping"),
    ("ticket", "station", "boarding"),
    ("racket", "court", "playing"),
    ("stethoscope", "hospital", "listening"),
    ("easel", "studio", "painting"),
    ("cart", "supermarket", "shopping"),
    ("altar", "church", "praying"),
    ("locker", "gym", "storing"),
    ("telescope", "observatory", "stargazing"),
];
pub const ADJECTIVES: [&str; 10] = ["old", "new", "red", "small", "large", "shiny", "broken", "heavy", "cheap", "blue"];

/// `adjective object` heads linked to the object's location and purpose;
/// the object noun alone determines both tails.
pub fn object_kg(adjectives: usize) -> KnowledgeGraph {
    let mut triples = Vec::new();
    for adj in &ADJECTIVES[..adjectives] {
        for (obj, loc, purpose) in OBJECTS {
            let head = format!("{adj} {obj}");
            triples.push(Triple::conceptnet(&head, "AtLocation", loc));
            triples.push(Triple::conceptnet(&head, "UsedFor", purpose));
        }
    }
    KnowledgeGraph::from_triples(triples)
}

pub fn vg(head: &str, rel: &str, tail: &str) -> Triple {
    Triple::new(head, rel, tail, 1.0, Source::VisualGenome).unwrap()
}

/// Visual Genome-style annotations with known repeat counts.
pub fn vg_annotations() -> Vec<(Triple, usize)> {
    [
        ("bread", "into", "the toaster", 4),
        ("shawl", "on", "your shoulders", 4),
        ("scarf", "on", "your shoulders", 5),
        ("toast", "in", "the toaster", 4),
        ("bike", "parked near", "the trees", 6),
        ("pedestrian", "on", "the street", 4),
        ("pedestrian", "onto", "the street", 5),
        ("pedestrian", "above", "the street", 4),
        ("lamp", "on top of", "the desk", 4),
        ("cat", "under", "the table", 7),
        ("bread", "on the top of", "the toaster", 2),
        ("corset", "under", "your shoulders", 3),
        ("dog", "near", "the tree", 1),
        ("man", "riding", "the horse", 9),
    ]
    .iter()
    .map(|(h, r, t, n)| (vg(h, r, t), *n))
    .collect()
}

/// The annotations expanded into one triple per occurrence, interleaved.
pub fn vg_occurrences() -> Vec<Triple> {
    let ann = vg_annotations();
    let max = ann.iter().map(|a| a.1).max().unwrap_or(0);
    let mut out = Vec::new();
    for round in 0..max {
        for (t, n) in &ann {
            if round < *n {
                out.push(t.clone());
            }
        }
    }
    out
}
