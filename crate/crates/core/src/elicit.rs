//! Linking benchmark questions and options to knowledge-graph triples.

use std::collections::{BTreeSet, HashSet};

use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, SpatialClassTaxonomy, Triple};
use crate::qa::QAItem;
use crate::text::{normalize_concept, stop_words, tokenize};

const CURATED_SPATIAL_FORMS: &str = include_str!("../data/spatial_lexicon.txt");

#[derive(Debug, Clone)]
pub struct ConceptMatchConfig {
    pub max_phrase_len: usize,
    pub stop_words: HashSet<String>,
    /// Match triple concepts by content-token containment instead of exact
    /// phrase equality.
    pub relaxed: bool,
}

impl Default for ConceptMatchConfig {
    fn default() -> Self {
        ConceptMatchConfig {
            max_phrase_len: 4,
            stop_words: stop_words().iter().map(|s| s.to_string()).collect(),
            relaxed: true,
        }
    }
}

impl ConceptMatchConfig {
    pub fn exact() -> Self {
        ConceptMatchConfig {
            relaxed: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_phrase_len == 0 {
            return Err(Error::arg("max_phrase_len must be >= 1"));
        }
        if self.stop_words.is_empty() {
            return Err(Error::arg("stop word set must be non-empty"));
        }
        Ok(())
    }

    fn filtered_tokens(&self, text: &str) -> Vec<String> {
        tokenize(text)
            .into_iter()
            .filter(|t| !self.stop_words.contains(t))
            .collect()
    }
}

/// All contiguous n-grams (1..=max_phrase_len) of the stop-word-filtered
/// token sequence.
pub fn extract_concepts(text: &str, cfg: &ConceptMatchConfig) -> BTreeSet<String> {
    let tokens = cfg.filtered_tokens(text);
    let mut phrases = BTreeSet::new();
    for start in 0..tokens.len() {
        for end in start + 1..=(start + cfg.max_phrase_len).min(tokens.len()) {
            phrases.insert(tokens[start..end].join(" "));
        }
    }
    phrases
}

struct Side {
    tokens: Vec<String>,
    phrases: BTreeSet<String>,
}

impl Side {
    fn new(text: &str, cfg: &ConceptMatchConfig) -> Self {
        Side {
            tokens: cfg.filtered_tokens(text),
            phrases: extract_concepts(text, cfg),
        }
    }

    fn matches(&self, concept: &str, cfg: &ConceptMatchConfig) -> bool {
        if !cfg.relaxed {
            return self.phrases.contains(&tokenize(concept).join(" "));
        }
        let content: Vec<String> = cfg.filtered_tokens(concept);
        if content.is_empty() || content.len() > cfg.max_phrase_len {
            return false;
        }
        (0..self.tokens.len()).any(|start| {
            let window = &self.tokens[start..(start + cfg.max_phrase_len).min(self.tokens.len())];
            if content.len() <= 2 {
                content.iter().all(|c| window.contains(c))
            } else {
                is_subsequence(&content, window)
            }
        })
    }
}

pub(crate) fn is_subsequence(needle: &[String], hay: &[String]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

/// Ids of triples linking a question phrase to an option phrase, in either
/// direction, ascending.
pub fn connecting_triple_ids(
    kg: &KnowledgeGraph,
    question: &str,
    option: &str,
    cfg: &ConceptMatchConfig,
) -> Vec<usize> {
    let q = Side::new(question, cfg);
    let o = Side::new(option, cfg);
    let mut candidates: BTreeSet<usize> = BTreeSet::new();
    for tok in q.tokens.iter().chain(&o.tokens) {
        candidates.extend(kg.ids_by_head_token(tok));
        candidates.extend(kg.ids_by_tail_token(tok));
    }
    candidates
        .into_iter()
        .filter(|&id| {
            let t = &kg.triples()[id];
            (q.matches(&t.head, cfg) && o.matches(&t.tail, cfg))
                || (o.matches(&t.head, cfg) && q.matches(&t.tail, cfg))
        })
        .collect()
}

pub fn find_connecting_triples(
    kg: &KnowledgeGraph,
    question: &str,
    option: &str,
    cfg: &ConceptMatchConfig,
) -> Vec<Triple> {
    connecting_triple_ids(kg, question, option, cfg)
        .into_iter()
        .map(|id| kg.triples()[id].clone())
        .collect()
}

/// Relation of the heaviest triple joining the two concepts in either
/// direction; ties go to the lexicographically smallest relation.
pub fn classify_question_type(
    kg: &KnowledgeGraph,
    question_concept: &str,
    answer_concept: &str,
) -> Option<String> {
    let qc = normalize_concept(question_concept);
    let ac = normalize_concept(answer_concept);
    let first = tokenize(&qc).into_iter().next()?;
    let mut ids: BTreeSet<usize> = kg.ids_by_head_token(&first).iter().copied().collect();
    ids.extend(kg.ids_by_tail_token(&first));
    ids.into_iter()
        .map(|id| &kg.triples()[id])
        .filter(|t| {
            let (h, tl) = (normalize_concept(&t.head), normalize_concept(&t.tail));
            (h == qc && tl == ac) || (h == ac && tl == qc)
        })
        .min_by(|a, b| {
            b.weight
                .total_cmp(&a.weight)
                .then_with(|| a.relation.cmp(&b.relation))
        })
        .map(|t| t.relation.clone())
}

/// Surface forms that mark a question as spatially relevant.
#[derive(Debug, Clone)]
pub struct SpatialLexicon {
    forms: Vec<Vec<String>>,
}

impl SpatialLexicon {
    /// Taxonomy member relations plus the curated preposition list.
    pub fn embedded(taxonomy: &SpatialClassTaxonomy) -> Self {
        Self::from_forms(
            taxonomy
                .all_members()
                .chain(lexicon_lines(CURATED_SPATIAL_FORMS)),
        )
    }

    /// One surface form per line; `#` comments and blank lines skipped.
    pub fn parse(text: &str) -> Self {
        Self::from_forms(lexicon_lines(text))
    }

    pub fn from_forms<'a>(forms: impl IntoIterator<Item = &'a str>) -> Self {
        let set: BTreeSet<Vec<String>> = forms
            .into_iter()
            .map(tokenize)
            .filter(|f| !f.is_empty())
            .collect();
        SpatialLexicon {
            forms: set.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn matches(&self, text: &str) -> bool {
        let tokens = tokenize(text);
        self.forms
            .iter()
            .any(|f| tokens.windows(f.len()).any(|w| w == f.as_slice()))
    }
}

fn lexicon_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

#[derive(Debug, Clone)]
pub struct SpatialSubset {
    pub items: Vec<QAItem>,
    pub total: usize,
    pub extracted: usize,
}

/// Items whose question (and, if `include_options`, any option) contains a
/// spatial surface form. Input order is preserved.
pub fn extract_spatial_subset(
    items: &[QAItem],
    lexicon: &SpatialLexicon,
    include_options: bool,
) -> SpatialSubset {
    let kept: Vec<QAItem> = items
        .iter()
        .filter(|it| {
            lexicon.matches(&it.question)
                || (include_options && it.options.iter().any(|o| lexicon.matches(o)))
        })
        .cloned()
        .collect();
    SpatialSubset {
        total: items.len(),
        extracted: kept.len(),
        items: kept,
    }
}

/// `benchmark<TAB>total<TAB>extracted` summary with a header row.
pub fn subset_summary_tsv(rows: &[(&str, &SpatialSubset)]) -> String {
    let mut out = String::from("benchmark\ttotal\textracted\n");
    for (name, s) in rows {
        out.push_str(&format!("{name}\t{}\t{}\n", s.total, s.extracted));
    }
    out
}
