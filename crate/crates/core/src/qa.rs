//! Multiple-choice items and their JSONL representation.

use std::collections::HashSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::Triple;
use crate::text::normalize_ws;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ItemMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_triple: Option<Triple>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_type: Option<String>,
    /// Concept the question is about, when the benchmark supplies one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_concept: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAItem {
    pub id: String,
    #[serde(default)]
    pub context: String,
    pub question: String,
    pub options: Vec<String>,
    pub answer_index: usize,
    #[serde(default)]
    pub meta: ItemMeta,
}

impl QAItem {
    pub fn validate(&self) -> Result<()> {
        if self.options.len() < 2 {
            return Err(Error::arg(format!(
                "item {}: needs at least 2 options, found {}",
                self.id,
                self.options.len()
            )));
        }
        if self.answer_index >= self.options.len() {
            return Err(Error::arg(format!(
                "item {}: answer_index {} out of range for {} options",
                self.id,
                self.answer_index,
                self.options.len()
            )));
        }
        let mut seen = HashSet::new();
        for opt in &self.options {
            if !seen.insert(normalize_ws(opt)) {
                return Err(Error::arg(format!("item {}: duplicate option {opt:?}", self.id)));
            }
        }
        Ok(())
    }

    pub fn gold(&self) -> &str {
        &self.options[self.answer_index]
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("QAItem serializes")
    }
}

/// Serialize items as JSONL, one object per line.
pub fn write_jsonl(items: &[QAItem]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&item.to_json_line());
        out.push('\n');
    }
    out
}

/// Parse and validate JSONL items; errors carry the 1-based line number.
pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<QAItem>> {
    let mut items = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let load_err = |message: String| Error::Load {
            line: i + 1,
            message,
        };
        let item: QAItem = serde_json::from_str(&line).map_err(|e| load_err(e.to_string()))?;
        item.validate().map_err(|e| load_err(e.to_string()))?;
        items.push(item);
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(options: &[&str], answer_index: usize) -> QAItem {
        QAItem {
            id: "x".into(),
            context: String::new(),
            question: "q".into(),
            options: options.iter().map(|s| s.to_string()).collect(),
            answer_index,
            meta: ItemMeta::default(),
        }
    }

    #[test]
    fn validation() {
        assert!(item(&["a", "b"], 1).validate().is_ok());
        assert!(item(&["a"], 0).validate().is_err());
        assert!(item(&["a", "b"], 2).validate().is_err());
        assert!(item(&["a b", "a  b"], 0).validate().is_err());
    }

    #[test]
    fn context_and_meta_are_optional() {
        let line = r#"{"id":"1","question":"q?","options":["a","b"],"answer_index":1}"#;
        let items = read_jsonl(line.as_bytes()).unwrap();
        assert_eq!(items[0].context, "");
        assert_eq!(items[0].meta, ItemMeta::default());
    }

    #[test]
    fn jsonl_roundtrip_preserves_items() {
        let mut it = item(&["a", "b", "c"], 2);
        it.meta.relation = Some("AtLocation".into());
        it.meta.source_triple = Some(Triple::conceptnet("h", "AtLocation", "c"));
        let text = write_jsonl(&[it.clone(), item(&["x", "y"], 0)]);
        let back = read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back[0], it);
        assert_eq!(back.len(), 2);
    }
}
