use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::text::normalize_concept;

const DEFAULT_TAXONOMY: &str = include_str!("../../data/taxonomy.tsv");

/// Surface forms the ABOVE class must always contain.
pub const ABOVE_REQUIRED: [&str; 7] = ["above", "over", "up", "top", "overhead", "north", "upside"];

/// Spatial classes and the surface relations that belong to each.
///
/// Member sets are pairwise disjoint, so a relation maps to at most one class.
#[derive(Debug, Clone)]
pub struct SpatialClassTaxonomy {
    classes: BTreeMap<String, BTreeSet<String>>,
    member_to_class: HashMap<String, String>,
}

impl SpatialClassTaxonomy {
    /// The taxonomy shipped with the crate (`data/taxonomy.tsv`).
    pub fn embedded() -> Self {
        Self::parse_tsv(DEFAULT_TAXONOMY).expect("embedded taxonomy is valid")
    }

    /// Parse `class_id<TAB>member_relation` lines; `#` comments and blank
    /// lines are skipped.
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut classes: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut member_to_class: HashMap<String, String> = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 2 {
                return Err(Error::parse(lineno, "expected class_id<TAB>member_relation"));
            }
            let class = cols[0].trim();
            let member = normalize_concept(cols[1]);
            if class.is_empty() || member.is_empty() {
                return Err(Error::parse(lineno, "empty class id or member"));
            }
            if let Some(prev) = member_to_class.get(&member) {
                if prev != class {
                    return Err(Error::parse(
                        lineno,
                        format!("member {member:?} already belongs to {prev}"),
                    ));
                }
            }
            member_to_class.insert(member.clone(), class.to_string());
            classes.entry(class.to_string()).or_default().insert(member);
        }
        let above = classes.get("ABOVE");
        for req in ABOVE_REQUIRED {
            if !above.is_some_and(|m| m.contains(req)) {
                return Err(Error::arg(format!("taxonomy class ABOVE must contain {req:?}")));
            }
        }
        Ok(SpatialClassTaxonomy {
            classes,
            member_to_class,
        })
    }

    /// The class of a relation: its own class if the whole relation is a
    /// member, otherwise the class of the longest member it contains as a
    /// word span ("parked near" is NEAR).
    pub fn classify(&self, relation: &str) -> Option<&str> {
        self.locate(relation).map(|(class, _)| class)
    }

    /// Class and word span `(start, len)` of the spatial part of `relation`.
    /// The longest matching span wins, then the leftmost.
    pub fn locate(&self, relation: &str) -> Option<(&str, (usize, usize))> {
        let norm = normalize_concept(relation);
        let words: Vec<&str> = norm.split(' ').filter(|w| !w.is_empty()).collect();
        for len in (1..=words.len()).rev() {
            for start in 0..=words.len() - len {
                if let Some(class) = self.member_to_class.get(&words[start..start + len].join(" ")) {
                    return Some((class.as_str(), (start, len)));
                }
            }
        }
        None
    }

    pub fn class_ids(&self) -> impl Iterator<Item = &str> {
        self.classes.keys().map(String::as_str)
    }

    pub fn members(&self, class: &str) -> Option<&BTreeSet<String>> {
        self.classes.get(class)
    }

    pub fn all_members(&self) -> impl Iterator<Item = &str> {
        self.classes.values().flatten().map(String::as_str)
    }
}
