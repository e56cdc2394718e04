mod common;

use std::collections::BTreeSet;

use kgqa_core::elicit::{
    connecting_triple_ids, extract_concepts, extract_spatial_subset, find_connecting_triples,
    ConceptMatchConfig, SpatialLexicon,
};
use kgqa_core::kg::{KnowledgeGraph, SpatialClassTaxonomy, Triple};
use kgqa_core::qa::{ItemMeta, QAItem};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn ngrams_match_exhaustive_enumeration() {
    let cfg = ConceptMatchConfig {
        stop_words: ["the".to_string()].into(),
        ..Default::default()
    };
    let got = extract_concepts("the big red door", &cfg);
    let words = ["big", "red", "door"];
    let mut expected = BTreeSet::new();
    for i in 0..words.len() {
        for j in i..words.len() {
            expected.insert(words[i..=j].join(" "));
        }
    }
    assert_eq!(got, expected);
    assert_eq!(got.len(), 6);
}

#[test]
fn planted_connections_are_found() {
    let kg = KnowledgeGraph::from_triples(vec![
        Triple::conceptnet("revolving door", "AtLocation", "bank"),
        Triple::conceptnet("cat", "IsA", "pet"),
        Triple::conceptnet("money", "AtLocation", "bank"),
        Triple::conceptnet("bank", "HasA", "revolving door"),
        Triple::conceptnet("knife", "UsedFor", "cutting"),
        Triple::conceptnet("door", "PartOf", "house"),
        Triple::conceptnet("security", "RelatedTo", "guard"),
        Triple::conceptnet("travel", "RelatedTo", "bank"),
        Triple::conceptnet("mall", "HasA", "shop"),
        Triple::conceptnet("ocean", "HasA", "fish"),
    ]);
    let q = "A revolving door is convenient for two direction travel, but it also serves as a security measure at a what?";
    let cfg = ConceptMatchConfig::default();
    let ids = connecting_triple_ids(&kg, q, "bank", &cfg);
    assert_eq!(ids, vec![0, 3, 7]);
    assert_eq!(ids, common::brute_force_connecting(&kg, q, "bank", &cfg));
    assert_eq!(find_connecting_triples(&kg, q, "bank", &cfg).len(), 3);
}

proptest! {
    #[test]
    fn matches_brute_force_and_relaxation_is_monotone(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kg = common::random_kg(&mut rng, 60);
        let q = common::random_phrase(&mut rng, 8);
        let o = common::random_phrase(&mut rng, 3);
        let relaxed = ConceptMatchConfig::default();
        let exact = ConceptMatchConfig::exact();
        let r = connecting_triple_ids(&kg, &q, &o, &relaxed);
        let e = connecting_triple_ids(&kg, &q, &o, &exact);
        prop_assert_eq!(&r, &common::brute_force_connecting(&kg, &q, &o, &relaxed));
        prop_assert_eq!(&e, &common::brute_force_connecting(&kg, &q, &o, &exact));
        prop_assert!(e.iter().all(|id| r.contains(id)));
    }

    #[test]
    fn spatial_subset_is_an_order_preserving_idempotent_filter(
        questions in prop::collection::vec("(how|the|put|cat|on|under|in front of|bread|left|is){1,6}", 0..20),
    ) {
        let items: Vec<QAItem> = questions.iter().enumerate().map(|(i, q)| item(&i.to_string(), q, &["yes", "no"])).collect();
        let lex = SpatialLexicon::embedded(&SpatialClassTaxonomy::embedded());
        let once = extract_spatial_subset(&items, &lex, true);
        let twice = extract_spatial_subset(&once.items, &lex, true);
        prop_assert_eq!(&once.items, &twice.items);
        let mut pos = 0;
        for kept in &once.items {
            let k = items[pos..].iter().position(|i| i == kept).unwrap();
            pos += k + 1;
        }
    }
}

fn item(id: &str, question: &str, options: &[&str]) -> QAItem {
    QAItem {
        id: id.into(),
        context: String::new(),
        question: question.into(),
        options: options.iter().map(|s| s.to_string()).collect(),
        answer_index: 0,
        meta: ItemMeta::default(),
    }
}

#[test]
fn twenty_item_fixture_with_seven_spatial() {
    let spatial = [
        item("s1", "How do you wear a shawl?", &["place it on your shoulders", "wear it as a hat"]),
        item("s2", "How do you make a plain toast?", &["place the bread into the toaster", "eat the bread raw"]),
        item("s3", "Where does the cat sleep?", &["under the table", "at noon"]),
        item("s4", "What is hanging above the fireplace?", &["a painting", "a song"]),
        item("s5", "The car parked next to what?", &["the curb", "yesterday"]),
        item("s6", "Where did she leave the keys?", &["behind the door", "very quickly"]),
        item("s7", "Which shelf holds the salt?", &["the one to the left of the stove", "salty"]),
    ];
    let plain = [
        item("p1", "Why did Robin cry?", &["she was sad", "she was hungry"]),
        item("p2", "What will Sam want to do next?", &["go home", "eat lunch"]),
        item("p3", "How would others feel afterwards?", &["hopeful", "sorry"]),
        item("p4", "What is a revolving door good for?", &["security", "comfort"]),
        item("p5", "Why would someone buy a dog?", &["companionship", "taxes"]),
        item("p6", "What does a chef do?", &["cook food", "fly planes"]),
        item("p7", "How do you clean a mirror?", &["wipe it with a cloth", "paint it"]),
        item("p8", "What happens when water boils?", &["steam rises", "nothing"]),
        item("p9", "Who wrote the letter?", &["Alex", "Jordan"]),
        item("p10", "What color is grass?", &["green", "purple"]),
        item("p11", "Why do birds sing?", &["to communicate", "to pay bills"]),
        item("p12", "What is bread made from?", &["flour", "stone"]),
        item("p13", "How do you sharpen a pencil?", &["use a sharpener", "wash it"]),
    ];
    let mut items = Vec::new();
    let mut expected = Vec::new();
    for i in 0..20 {
        // interleave: spatial items at positions 0, 3, 6, ...
        if i % 3 == 0 && i / 3 < spatial.len() {
            items.push(spatial[i / 3].clone());
            expected.push(spatial[i / 3].id.clone());
        } else {
            items.push(plain[i - (i / 3 + 1).min(spatial.len())].clone());
        }
    }
    assert_eq!(items.len(), 20);
    let lex = SpatialLexicon::embedded(&SpatialClassTaxonomy::embedded());
    let got = extract_spatial_subset(&items, &lex, true);
    let ids: Vec<String> = got.items.iter().map(|i| i.id.clone()).collect();
    assert_eq!(ids, expected);
    assert_eq!((got.total, got.extracted), (20, 7));
}

#[test]
fn lexicon_file_format() {
    let lex = SpatialLexicon::parse("# comment\non\n\nin front of\n");
    assert_eq!(lex.len(), 2);
    assert!(lex.matches("standing in front of the house"));
    assert!(!lex.matches("in the front garden"));
    assert!(lex.matches("put it ON."));
}
