//! Synthetic multiple-choice item generation from knowledge-graph triples.

use std::collections::{HashMap, HashSet};

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, SpatialClassTaxonomy, Triple};
use crate::qa::{ItemMeta, QAItem};
use crate::text::{content_tokens, hash64, normalize_concept};
use crate::verbalize::TemplateTable;

pub const MASK_TOKEN: &str = "[MASK]";

/// Distractors sharing more than this fraction of their content tokens with
/// the correct option are rejected.
pub const MAX_DISTRACTOR_OVERLAP: f64 = 0.5;

/// Share of the distractor's content tokens that also occur in the correct
/// option. A distractor without content tokens has overlap 0.
pub fn lexical_overlap(distractor: &str, correct: &str) -> f64 {
    let d: HashSet<String> = content_tokens(distractor).into_iter().collect();
    if d.is_empty() {
        return 0.0;
    }
    let c: HashSet<String> = content_tokens(correct).into_iter().collect();
    d.intersection(&c).count() as f64 / d.len() as f64
}

pub fn passes_lexical_filter(distractor: &str, correct: &str) -> bool {
    lexical_overlap(distractor, correct) <= MAX_DISTRACTOR_OVERLAP
}

fn item_rng(seed: u64, key: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(hash64(seed, key))
}

/// Candidate distractors for triple `id`: distinct tails of other triples
/// with the same relation, minus every tail the same head already has under
/// that relation, minus lexically-too-close candidates. First-occurrence order.
pub fn distractor_pool(kg: &KnowledgeGraph, id: usize) -> Vec<&str> {
    let t = &kg.triples()[id];
    let ids = kg.ids_by_relation(&t.relation);
    let known: HashSet<&str> = ids
        .iter()
        .map(|&j| &kg.triples()[j])
        .filter(|o| o.head == t.head)
        .map(|o| o.tail.as_str())
        .collect();
    let mut seen = HashSet::new();
    ids.iter()
        .map(|&j| kg.triples()[j].tail.as_str())
        .filter(|tail| !known.contains(tail) && seen.insert(*tail))
        .filter(|tail| passes_lexical_filter(tail, &t.tail))
        .collect()
}

/// One item per eligible triple, in triple order.
///
/// Each item's sampling uses its own stream derived from `(seed, triple id)`,
/// so the output is independent of scheduling and of which other triples
/// are eligible.
pub fn synthesize_qa(
    kg: &KnowledgeGraph,
    templates: &TemplateTable,
    num_options: usize,
    seed: u64,
) -> Result<Vec<QAItem>> {
    if num_options < 2 {
        return Err(Error::arg(format!("num_options must be >= 2, got {num_options}")));
    }
    let items = (0..kg.len())
        .into_par_iter()
        .filter_map(|id| synthesize_one(kg, templates, num_options, seed, id))
        .collect();
    Ok(items)
}

fn synthesize_one(
    kg: &KnowledgeGraph,
    templates: &TemplateTable,
    num_options: usize,
    seed: u64,
    id: usize,
) -> Option<QAItem> {
    let t = &kg.triples()[id];
    let (context, question) = templates.question_for(&t.head, &t.relation)?;
    let pool = distractor_pool(kg, id);
    if pool.len() < num_options - 1 {
        return None;
    }
    let mut rng = item_rng(seed, id as u64);
    let mut options: Vec<String> = index::sample(&mut rng, pool.len(), num_options - 1)
        .into_iter()
        .map(|i| pool[i].to_string())
        .collect();
    options.push(t.tail.clone());
    options.shuffle(&mut rng);
    let answer_index = options.iter().position(|o| *o == t.tail)?;
    Some(QAItem {
        id: format!("synth-{id}"),
        context,
        question,
        options,
        answer_index,
        meta: ItemMeta {
            source_triple: Some(t.clone()),
            relation: Some(t.relation.clone()),
            question_type: Some(t.relation.clone()),
            question_concept: Some(t.head.clone()),
        },
    })
}

/// Replace `span_len` whitespace tokens starting at `span_start` with a
/// single `[MASK]`.
pub fn mask_span(sentence: &str, span_start: usize, span_len: usize) -> Result<String> {
    let tokens: Vec<&str> = sentence.split_whitespace().collect();
    if span_len == 0 || span_start + span_len > tokens.len() {
        return Err(Error::arg(format!(
            "span [{span_start}, {}) outside sentence of {} tokens",
            span_start + span_len,
            tokens.len()
        )));
    }
    let mut out: Vec<&str> = Vec::with_capacity(tokens.len() - span_len + 1);
    out.extend_from_slice(&tokens[..span_start]);
    out.push(MASK_TOKEN);
    out.extend_from_slice(&tokens[span_start + span_len..]);
    Ok(out.join(" "))
}

/// Masked spatial question for a triple whose relation has a spatial class.
/// Options are class ids; the correct one is the relation's class.
pub fn make_spatial_masked_question(
    t: &Triple,
    taxonomy: &SpatialClassTaxonomy,
    num_options: usize,
    seed: u64,
) -> Option<QAItem> {
    let (class, (rel_start, rel_len)) = taxonomy.locate(&t.relation)?;
    if num_options < 2 {
        return None;
    }
    let others: Vec<&str> = taxonomy.class_ids().filter(|c| *c != class).collect();
    if others.len() < num_options - 1 {
        return None;
    }
    let head_len = t.head.split_whitespace().count();
    let sentence = format!("{} {} {}", t.head, t.relation.to_lowercase(), t.tail);
    let question = mask_span(&sentence, head_len + rel_start, rel_len).ok()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut options: Vec<String> = index::sample(&mut rng, others.len(), num_options - 1)
        .into_iter()
        .map(|i| others[i].to_string())
        .collect();
    options.push(class.to_string());
    options.shuffle(&mut rng);
    let answer_index = options.iter().position(|o| o == class)?;
    Some(QAItem {
        id: format!("spatial:{}|{}|{}", t.head, class, t.tail),
        context: String::new(),
        question,
        options,
        answer_index,
        meta: ItemMeta {
            source_triple: Some(t.clone()),
            relation: Some(t.relation.clone()),
            question_type: Some(class.to_string()),
            question_concept: Some(t.head.clone()),
        },
    })
}

/// Masked spatial items for every spatial triple, consolidated so that each
/// (head, class, tail) yields one item (the first triple wins).
pub fn synthesize_spatial(
    kg: &KnowledgeGraph,
    taxonomy: &SpatialClassTaxonomy,
    num_options: usize,
    seed: u64,
) -> Result<Vec<QAItem>> {
    if num_options < 2 {
        return Err(Error::arg(format!("num_options must be >= 2, got {num_options}")));
    }
    let mut seen: HashMap<(String, &str, String), usize> = HashMap::new();
    let mut chosen = Vec::new();
    for (id, t) in kg.triples().iter().enumerate() {
        let Some(class) = taxonomy.classify(&t.relation) else {
            continue;
        };
        let key = (normalize_concept(&t.head), class, normalize_concept(&t.tail));
        if seen.insert(key, id).is_none() {
            chosen.push(id);
        }
    }
    Ok(chosen
        .into_par_iter()
        .filter_map(|id| {
            make_spatial_masked_question(
                &kg.triples()[id],
                taxonomy,
                num_options,
                hash64(seed, id as u64),
            )
        })
        .collect())
}
