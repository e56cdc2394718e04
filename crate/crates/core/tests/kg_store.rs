use std::collections::{BTreeMap, BTreeSet};

use kgqa_core::kg::{KnowledgeGraph, Source, Triple};
use proptest::prelude::*;

const KG6: &str = include_str!("fixtures/kg6.tsv");

/// Independent tokenizer for the oracle: lowercase words with ASCII
/// punctuation removed.
fn oracle_tokens(s: &str) -> BTreeSet<String> {
    s.to_lowercase()
        .split_whitespace()
        .map(|w| w.chars().filter(|c| !c.is_ascii_punctuation()).collect::<String>())
        .filter(|w| !w.is_empty())
        .collect()
}

fn check_indexes(kg: &KnowledgeGraph) {
    let mut heads: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut tails: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut rels: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (id, t) in kg.triples().iter().enumerate() {
        for tok in oracle_tokens(&t.head) {
            heads.entry(tok).or_default().push(id);
        }
        for tok in oracle_tokens(&t.tail) {
            tails.entry(tok).or_default().push(id);
        }
        rels.entry(t.relation.clone()).or_default().push(id);
    }
    let head_keys: BTreeSet<&str> = kg.head_tokens().collect();
    assert_eq!(head_keys, heads.keys().map(String::as_str).collect());
    let tail_keys: BTreeSet<&str> = kg.tail_tokens().collect();
    assert_eq!(tail_keys, tails.keys().map(String::as_str).collect());
    assert_eq!(kg.relations().collect::<Vec<_>>(), rels.keys().map(String::as_str).collect::<Vec<_>>());
    for (tok, ids) in &heads {
        assert_eq!(kg.ids_by_head_token(tok), ids.as_slice(), "head token {tok}");
    }
    for (tok, ids) in &tails {
        assert_eq!(kg.ids_by_tail_token(tok), ids.as_slice(), "tail token {tok}");
    }
    for (rel, ids) in &rels {
        assert_eq!(kg.ids_by_relation(rel), ids.as_slice());
    }
}

#[test]
fn six_line_fixture() {
    let kg = KnowledgeGraph::parse_tsv_str(KG6).unwrap();
    assert_eq!(kg.len(), 4);
    let heads: Vec<&str> = kg.triples().iter().map(|t| t.head.as_str()).collect();
    assert_eq!(heads, vec!["revolving door", "book", "dinner", "cat"]);
    assert_eq!(kg.triples()[2].tail, "restaurant");
    assert_eq!(kg.triples()[3].source, Source::WordNet);
    check_indexes(&kg);
    // punctuation is stripped from index keys
    assert_eq!(kg.ids_by_tail_token("pet"), &[3]);
}

#[test]
fn frequency_filter_against_count_oracle() {
    let mut lines = Vec::new();
    for (name, n) in [("a", 5), ("b", 3), ("c", 4)] {
        for _ in 0..n {
            lines.push(format!("{name}\ton\ttable\t1\tVISUALGENOME"));
        }
    }
    // interleave so first-occurrence order differs from block order
    lines.swap(0, 6);
    let text = lines.join("\n");
    let kg = KnowledgeGraph::parse_tsv_str(&text).unwrap();

    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut first_seen: Vec<String> = Vec::new();
    for line in &lines {
        let head = line.split('\t').next().unwrap().to_string();
        if !counts.contains_key(&head) {
            first_seen.push(head.clone());
        }
        *counts.entry(head).or_default() += 1;
    }
    let expected: Vec<(String, f64)> = first_seen
        .into_iter()
        .filter(|h| counts[h] >= 4)
        .map(|h| (h.clone(), counts[&h] as f64))
        .collect();

    let filtered = kg.filter_by_frequency(4).unwrap();
    let got: Vec<(String, f64)> = filtered.triples().iter().map(|t| (t.head.clone(), t.weight)).collect();
    assert_eq!(got, expected);
    assert_eq!(got.iter().map(|g| g.0.as_str()).collect::<BTreeSet<_>>(), BTreeSet::from(["a", "c"]));
}

const WORDS: [&str; 8] = ["red", "door", "bank", "Big", "cat.", "table", "of", "the"];
const RELS: [&str; 4] = ["AtLocation", "IsA", "on", "near"];
const SOURCES: [Source; 5] = [
    Source::ConceptNet,
    Source::Atomic,
    Source::WordNet,
    Source::Wikidata,
    Source::VisualGenome,
];

fn phrase() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(&WORDS[..]), 1..4).prop_map(|w| w.join(" "))
}

fn triple() -> impl Strategy<Value = Triple> {
    (phrase(), prop::sample::select(&RELS[..]), phrase(), 0u32..40, prop::sample::select(&SOURCES[..]))
        .prop_map(|(h, r, t, w, s)| Triple::new(&h, r, &t, f64::from(w) * 0.25, s).unwrap())
}

fn graph() -> impl Strategy<Value = KnowledgeGraph> {
    prop::collection::vec(triple(), 0..40).prop_map(KnowledgeGraph::from_triples)
}

proptest! {
    #[test]
    fn tsv_roundtrip(kg in graph()) {
        let back = KnowledgeGraph::parse_tsv_str(&kg.to_tsv()).unwrap();
        prop_assert_eq!(back.triples(), kg.triples());
    }

    #[test]
    fn indexes_sound_and_complete(kg in graph()) {
        check_indexes(&kg);
        for (id, t) in kg.triples().iter().enumerate() {
            prop_assert!(kg.ids_by_relation(&t.relation).contains(&id));
            for tok in oracle_tokens(&t.head) {
                prop_assert!(kg.ids_by_head_token(&tok).contains(&id));
            }
            for tok in oracle_tokens(&t.tail) {
                prop_assert!(kg.ids_by_tail_token(&tok).contains(&id));
            }
        }
    }

    #[test]
    fn frequency_filter_is_idempotent(kg in graph(), k in 1usize..4) {
        let once = kg.filter_by_frequency(k).unwrap();
        let twice = once.filter_by_frequency(k).unwrap();
        prop_assert_eq!(once.triples(), twice.triples());
    }
}
