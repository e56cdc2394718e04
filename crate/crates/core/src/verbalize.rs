//! Turning triples and (context, question, option) sequences into text.

use std::sync::OnceLock;

use regex::{Regex, RegexBuilder};

use crate::error::{Error, Result};
use crate::kg::{Source, Triple};
use crate::text::normalize_ws;

const DEFAULT_TEMPLATES: &str = include_str!("../data/templates.tsv");

/// The nine ATOMIC relations that get their own special token.
pub const ATOMIC_RELATIONS: [&str; 9] = [
    "xIntent", "xNeed", "xAttr", "xEffect", "xReact", "xWant", "oEffect", "oReact", "oWant",
];

pub const BLANK_TOKEN: &str = "<blank>";

const WH_WORDS: [&str; 9] = ["what", "which", "who", "whom", "whose", "when", "where", "why", "how"];

pub fn is_atomic_relation(relation: &str) -> bool {
    ATOMIC_RELATIONS.contains(&relation)
}

/// Split a CamelCase (or already spaced) relation label into lowercase words.
/// A run of capitals starts a single word: `HasSubevent` -> `has subevent`.
pub fn split_relation(relation: &str) -> String {
    let mut words: Vec<String> = Vec::new();
    for part in relation.split(|c: char| c.is_whitespace() || c == '_') {
        let mut current = String::new();
        let mut prev_upper = false;
        for c in part.chars() {
            let upper = c.is_uppercase();
            if upper && !prev_upper && !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
            current.extend(c.to_lowercase());
            prev_upper = upper;
        }
        if !current.is_empty() {
            words.push(current);
        }
    }
    words.join(" ")
}

/// `(book, AtLocation, library)` -> `"book at location library"`.
pub fn triple_to_pseudosentence(t: &Triple) -> String {
    normalize_ws(&format!(
        "{} {} {}",
        t.head.to_lowercase(),
        split_relation(&t.relation),
        t.tail.to_lowercase()
    ))
}

fn render_blanks(text: &str) -> String {
    static RUN: OnceLock<Regex> = OnceLock::new();
    let run = RUN.get_or_init(|| Regex::new("_{3,}").unwrap());
    text.split_whitespace()
        .map(|tok| {
            if tok.chars().all(|c| c == '_') {
                BLANK_TOKEN.to_string()
            } else {
                run.replace_all(tok, BLANK_TOKEN).into_owned()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// ATOMIC triple as `head <relation> tail`, with blanks rendered as `<blank>`.
pub fn atomic_to_sentence(t: &Triple) -> Result<String> {
    if t.source != Source::Atomic {
        return Err(Error::arg(format!("expected an ATOMIC triple, got {}", t.source)));
    }
    if !is_atomic_relation(&t.relation) {
        return Err(Error::arg(format!("unknown ATOMIC relation {:?}", t.relation)));
    }
    Ok(format!(
        "{} <{}> {}",
        render_blanks(&t.head),
        t.relation,
        render_blanks(&t.tail)
    ))
}

#[derive(Debug, Clone)]
pub struct TemplateEntry {
    pub question_pattern: String,
    pub statement_pattern: String,
    /// Relation this entry verbalizes during synthesis, if any.
    pub relation: Option<String>,
    matcher: Regex,
}

impl TemplateEntry {
    pub fn new(question_pattern: &str, statement_pattern: &str, relation: Option<&str>) -> Result<Self> {
        if question_pattern.matches("{}").count() != 1 {
            return Err(Error::arg(format!(
                "question pattern must contain exactly one {{}} slot: {question_pattern:?}"
            )));
        }
        if statement_pattern.matches("{}").count() != 1 {
            return Err(Error::arg(format!(
                "statement pattern must contain exactly one {{}} option slot: {statement_pattern:?}"
            )));
        }
        let mut re = String::from("^");
        for (i, part) in normalize_ws(question_pattern).split("{}").enumerate() {
            if i > 0 {
                re.push_str("(.+?)");
            }
            let words: Vec<String> = part.split(' ').map(regex::escape).collect();
            re.push_str(&words.join(r"\s+"));
        }
        re.push('$');
        let matcher = RegexBuilder::new(&re)
            .case_insensitive(true)
            .build()
            .map_err(|e| Error::arg(e.to_string()))?;
        Ok(TemplateEntry {
            question_pattern: question_pattern.to_string(),
            statement_pattern: statement_pattern.to_string(),
            relation: relation.map(str::to_string),
            matcher,
        })
    }

    fn capture(&self, question: &str) -> Option<String> {
        self.matcher
            .captures(question)
            .map(|c| c.get(1).map_or("", |m| m.as_str()).trim().to_string())
    }

    fn instantiate(&self, context: &str, wildcard: &str, option: &str) -> String {
        let filled = self
            .statement_pattern
            .replace("{C}", context)
            .replace("{W}", wildcard)
            .replace("{}", option);
        tidy(&filled)
    }
}

fn tidy(text: &str) -> String {
    let s = normalize_ws(text).replace(" ,", ",");
    s.trim_start_matches(|c: char| c == ',' || c.is_whitespace())
        .to_string()
}

/// Ordered question-pattern -> statement-pattern table. First match wins.
#[derive(Debug, Clone)]
pub struct TemplateTable {
    pub entries: Vec<TemplateEntry>,
    /// When set, unmatched questions are stripped of a leading wh-word and
    /// trailing `?` before concatenation.
    pub fallback: bool,
}

impl Default for TemplateTable {
    fn default() -> Self {
        Self::embedded()
    }
}

impl TemplateTable {
    pub fn embedded() -> Self {
        Self::parse_tsv(DEFAULT_TEMPLATES).expect("embedded template table is valid")
    }

    pub fn empty() -> Self {
        TemplateTable {
            entries: Vec::new(),
            fallback: true,
        }
    }

    /// Columns: `question_pattern<TAB>statement_pattern[<TAB>relation]`.
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let relation = match cols.len() {
                2 => None,
                3 => Some(cols[2].trim()).filter(|r| !r.is_empty()),
                n => {
                    return Err(Error::parse(i + 1, format!("expected 2 or 3 columns, found {n}")))
                }
            };
            let entry = TemplateEntry::new(cols[0], cols[1], relation)
                .map_err(|e| Error::parse(i + 1, e.to_string()))?;
            entries.push(entry);
        }
        Ok(TemplateTable {
            entries,
            fallback: true,
        })
    }

    pub fn entry_for_relation(&self, relation: &str) -> Option<&TemplateEntry> {
        self.entries
            .iter()
            .find(|e| e.relation.as_deref() == Some(relation))
    }

    pub fn has_relation(&self, relation: &str) -> bool {
        self.entry_for_relation(relation).is_some()
    }

    /// Context and question used when synthesizing an item for `(head, relation, _)`.
    ///
    /// ATOMIC relations put the event in the context and ask about `PersonX`
    /// (x-relations) or `others` (o-relations); all other relations put the
    /// head into the question's wildcard slot.
    pub fn question_for(&self, head: &str, relation: &str) -> Option<(String, String)> {
        let entry = self.entry_for_relation(relation)?;
        let (context, subject) = if is_atomic_relation(relation) {
            let subject = if relation.starts_with('x') { "PersonX" } else { "others" };
            (head.to_string(), subject.to_string())
        } else {
            (String::new(), head.to_string())
        };
        Some((context, normalize_ws(&entry.question_pattern.replace("{}", &subject))))
    }

    /// Build the statement scored for one answer option.
    pub fn apply(&self, context: &str, question: &str, option: &str) -> String {
        let q = normalize_ws(question);
        for entry in &self.entries {
            if let Some(w) = entry.capture(&q) {
                return entry.instantiate(context, &w, option);
            }
        }
        if q.contains("[MASK]") {
            return tidy(&format!("{context} {}", q.replacen("[MASK]", option, 1)));
        }
        if !self.fallback {
            return normalize_ws(&format!("{context} {q} {option}"));
        }
        normalize_ws(&format!("{context} {} {option}", strip_question(&q)))
    }
}

/// Drop a trailing `?` and, when other words remain, a leading wh-word.
fn strip_question(q: &str) -> String {
    let q = q.trim().trim_end_matches('?').trim_end();
    let mut words = q.split_whitespace();
    let Some(first) = words.next() else {
        return String::new();
    };
    let rest: Vec<&str> = words.collect();
    let first_lc = first.to_lowercase();
    if !rest.is_empty() && WH_WORDS.contains(&first_lc.as_str()) {
        rest.join(" ")
    } else {
        std::iter::once(first).chain(rest).collect::<Vec<_>>().join(" ")
    }
}

/// Free-function form of [`TemplateTable::apply`].
pub fn apply_template(context: &str, question: &str, option: &str, table: &TemplateTable) -> String {
    table.apply(context, question, option)
}
