//! In-memory knowledge graph: triples, token/relation indexes, TSV ingestion.

mod taxonomy;

pub use taxonomy::SpatialClassTaxonomy;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{normalize_concept, normalize_ws, tokenize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Source {
    ConceptNet,
    Atomic,
    WordNet,
    Wikidata,
    VisualGenome,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::ConceptNet => "CONCEPTNET",
            Source::Atomic => "ATOMIC",
            Source::WordNet => "WORDNET",
            Source::Wikidata => "WIKIDATA",
            Source::VisualGenome => "VISUALGENOME",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "CONCEPTNET" => Ok(Source::ConceptNet),
            "ATOMIC" => Ok(Source::Atomic),
            "WORDNET" => Ok(Source::WordNet),
            "WIKIDATA" => Ok(Source::Wikidata),
            "VISUALGENOME" => Ok(Source::VisualGenome),
            other => Err(Error::arg(format!("unknown source tag {other:?}"))),
        }
    }
}

/// One knowledge-graph edge.
///
/// Head and tail are lowercased and whitespace-normalized, except for ATOMIC
/// triples whose event text keeps its casing (`PersonX`, `PersonY`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub head: String,
    pub relation: String,
    pub tail: String,
    pub weight: f64,
    pub source: Source,
}

impl Triple {
    pub fn new(
        head: &str,
        relation: &str,
        tail: &str,
        weight: f64,
        source: Source,
    ) -> Result<Self> {
        let norm = |s: &str| {
            if source == Source::Atomic {
                normalize_ws(s)
            } else {
                normalize_concept(s)
            }
        };
        let head = norm(head);
        let tail = norm(tail);
        let relation = relation.trim().to_string();
        if head.is_empty() || tail.is_empty() {
            return Err(Error::arg("head and tail must be non-empty"));
        }
        if relation.is_empty() {
            return Err(Error::arg("relation must be non-empty"));
        }
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::arg(format!("weight must be finite and >= 0, got {weight}")));
        }
        Ok(Triple {
            head,
            relation,
            tail,
            weight,
            source,
        })
    }

    /// Shorthand for a unit-weight ConceptNet triple.
    pub fn conceptnet(head: &str, relation: &str, tail: &str) -> Self {
        Triple::new(head, relation, tail, 1.0, Source::ConceptNet)
            .expect("valid conceptnet triple")
    }

    fn key(&self) -> (&str, &str, &str) {
        (&self.head, &self.relation, &self.tail)
    }

    /// The TSV line for this triple (no trailing newline).
    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.head, self.relation, self.tail, self.weight, self.source
        )
    }
}

/// Immutable triple store with relation and token indexes.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    triples: Vec<Triple>,
    by_relation: BTreeMap<String, Vec<usize>>,
    by_head_token: HashMap<String, Vec<usize>>,
    by_tail_token: HashMap<String, Vec<usize>>,
    /// Weights are occurrence counts produced by [`Self::filter_by_frequency`].
    counted: bool,
}

fn push_id(map: &mut HashMap<String, Vec<usize>>, key: String, id: usize) {
    let ids = map.entry(key).or_default();
    if ids.last() != Some(&id) {
        ids.push(id);
    }
}

impl KnowledgeGraph {
    pub fn from_triples(triples: Vec<Triple>) -> Self {
        let mut kg = KnowledgeGraph {
            triples,
            ..Default::default()
        };
        for (id, t) in kg.triples.iter().enumerate() {
            kg.by_relation.entry(t.relation.clone()).or_default().push(id);
            for tok in tokenize(&t.head) {
                push_id(&mut kg.by_head_token, tok, id);
            }
            for tok in tokenize(&t.tail) {
                push_id(&mut kg.by_tail_token, tok, id);
            }
        }
        kg
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn get(&self, id: usize) -> Option<&Triple> {
        self.triples.get(id)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Triple ids with the given relation, ascending.
    pub fn ids_by_relation(&self, relation: &str) -> &[usize] {
        self.by_relation.get(relation).map_or(&[], Vec::as_slice)
    }

    pub fn ids_by_head_token(&self, token: &str) -> &[usize] {
        self.by_head_token.get(token).map_or(&[], Vec::as_slice)
    }

    pub fn ids_by_tail_token(&self, token: &str) -> &[usize] {
        self.by_tail_token.get(token).map_or(&[], Vec::as_slice)
    }

    pub fn relations(&self) -> impl Iterator<Item = &str> {
        self.by_relation.keys().map(String::as_str)
    }

    pub fn head_tokens(&self) -> impl Iterator<Item = &str> {
        self.by_head_token.keys().map(String::as_str)
    }

    pub fn tail_tokens(&self) -> impl Iterator<Item = &str> {
        self.by_tail_token.keys().map(String::as_str)
    }

    /// Parse the five-column KG TSV format.
    pub fn parse_tsv<'a, I>(lines: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut triples = Vec::new();
        for (i, line) in lines.into_iter().enumerate() {
            let lineno = i + 1;
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 5 {
                return Err(Error::parse(
                    lineno,
                    format!("expected 5 tab-separated columns, found {}", cols.len()),
                ));
            }
            let weight: f64 = cols[3]
                .trim()
                .parse()
                .map_err(|_| Error::parse(lineno, format!("non-numeric weight {:?}", cols[3])))?;
            if !weight.is_finite() || weight < 0.0 {
                return Err(Error::parse(lineno, format!("invalid weight {:?}", cols[3])));
            }
            let source: Source = cols[4]
                .trim()
                .parse()
                .map_err(|e: Error| Error::parse(lineno, e.to_string()))?;
            let triple = Triple::new(cols[0], cols[1], cols[2], weight, source)
                .map_err(|e| Error::parse(lineno, e.to_string()))?;
            triples.push(triple);
        }
        Ok(KnowledgeGraph::from_triples(triples))
    }

    pub fn parse_tsv_str(text: &str) -> Result<Self> {
        KnowledgeGraph::parse_tsv(text.lines())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for t in &self.triples {
            out.push_str(&t.to_tsv());
            out.push('\n');
        }
        out
    }

    /// True for graphs returned by [`Self::filter_by_frequency`].
    pub fn is_counted(&self) -> bool {
        self.counted
    }

    /// Keep one copy of every (head, relation, tail) seen at least
    /// `min_occurrences` times; the kept copy's weight is its count.
    ///
    /// Each input triple counts once, except in an already filtered graph
    /// where it counts its weight, so re-filtering is a no-op.
    pub fn filter_by_frequency(&self, min_occurrences: usize) -> Result<Self> {
        if min_occurrences == 0 {
            return Err(Error::arg("min_occurrences must be >= 1"));
        }
        let mut counts: HashMap<(&str, &str, &str), (usize, f64)> = HashMap::new();
        for (id, t) in self.triples.iter().enumerate() {
            let n = if self.counted { t.weight } else { 1.0 };
            counts.entry(t.key()).or_insert((id, 0.0)).1 += n;
        }
        let mut kept: Vec<(usize, f64)> = counts
            .into_values()
            .filter(|&(_, count)| count >= min_occurrences as f64)
            .collect();
        kept.sort_unstable_by_key(|&(first, _)| first);
        let triples = kept
            .into_iter()
            .map(|(first, count)| Triple {
                weight: count,
                ..self.triples[first].clone()
            })
            .collect();
        let mut kg = KnowledgeGraph::from_triples(triples);
        kg.counted = true;
        Ok(kg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_single_line() {
        let kg = KnowledgeGraph::parse_tsv_str("dinner\tAtLocation\trestaurant\t1.0\tCONCEPTNET")
            .unwrap();
        assert_eq!(kg.len(), 1);
        let t = &kg.triples()[0];
        assert_eq!((t.head.as_str(), t.relation.as_str(), t.tail.as_str()), ("dinner", "AtLocation", "restaurant"));
        assert_eq!(kg.ids_by_relation("AtLocation"), &[0]);
    }

    #[test]
    fn empty_input_gives_empty_graph() {
        let kg = KnowledgeGraph::parse_tsv_str("").unwrap();
        assert!(kg.is_empty());
        assert_eq!(kg.relations().count(), 0);
        assert_eq!(kg.head_tokens().count(), 0);
        assert_eq!(kg.tail_tokens().count(), 0);
    }

    #[test]
    fn normalizes_head_and_tail() {
        let kg = KnowledgeGraph::parse_tsv_str("Revolving   Door\tAtLocation\t Bank \t2\tCONCEPTNET")
            .unwrap();
        assert_eq!(kg.triples()[0].head, "revolving door");
        assert_eq!(kg.triples()[0].tail, "bank");
        assert_eq!(kg.ids_by_head_token("revolving"), &[0]);
    }

    #[test]
    fn atomic_keeps_casing() {
        let kg = KnowledgeGraph::parse_tsv_str("PersonX eats ___\txWant\tto nap\t1\tATOMIC").unwrap();
        assert_eq!(kg.triples()[0].head, "PersonX eats ___");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = KnowledgeGraph::parse_tsv_str("# c\na\tb\tc\t1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = KnowledgeGraph::parse_tsv_str("a\tb\tc\t1\tCONCEPTNET\textra").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = KnowledgeGraph::parse_tsv_str("a\tb\tc\theavy\tCONCEPTNET").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = KnowledgeGraph::parse_tsv_str("\na\tb\tc\t-1\tCONCEPTNET").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = KnowledgeGraph::parse_tsv_str("a\tb\tc\t1\tFREEBASE").unwrap_err();
        assert!(err.to_string().contains("FREEBASE"));
        let err = KnowledgeGraph::parse_tsv_str(" \tb\tc\t1\tCONCEPTNET").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn filter_keeps_four_fold_triple() {
        let line = "bike\tnear\ttrees\t1\tVISUALGENOME\n";
        let kg = KnowledgeGraph::parse_tsv_str(&line.repeat(4)).unwrap();
        let f = kg.filter_by_frequency(4).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.triples()[0].weight, 4.0);
        assert!(kg.filter_by_frequency(5).unwrap().is_empty());
    }

    #[test]
    fn filter_rejects_zero_threshold() {
        assert!(matches!(
            KnowledgeGraph::default().filter_by_frequency(0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(KnowledgeGraph::default().filter_by_frequency(1).unwrap().is_empty());
    }
}
