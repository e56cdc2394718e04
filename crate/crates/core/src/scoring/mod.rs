//! Token-probability providers and answer-candidate scoring.
//!
//! Scores are negative mean log-probabilities, so lower means more
//! plausible and the predicted option is the argmin.

mod external;
mod ngram;

pub use external::{serve, ExternalProvider, ScoreRequest, ScoreResponse, TIMEOUT_ENV};
pub use ngram::{NgramConfig, NgramProvider, UniformProvider, BOS, EOS, UNK};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qa::QAItem;
use crate::text::{is_stop_word, tokenize};
use crate::verbalize::TemplateTable;

/// Source of conditional and masked token log-probabilities.
pub trait TokenProbabilityProvider: Send + Sync {
    fn vocab_size(&self) -> usize;

    /// log P(target | prefix). The provider supplies its own start-of-
    /// sequence conditioning for an empty prefix.
    fn logprob_next(&self, prefix: &[&str], target: &str) -> f64;

    /// log P(tokens[index] | every other token of the sequence).
    fn logprob_masked(&self, tokens: &[&str], index: usize) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSequence {
    pub tokens: Vec<String>,
    pub score: f64,
    pub per_token_logprobs: Vec<f64>,
}

impl ScoredSequence {
    /// Score with the mean taken over `per_token_logprobs`.
    pub fn from_logprobs(tokens: Vec<String>, per_token_logprobs: Vec<f64>) -> Self {
        let n = per_token_logprobs.len() as f64;
        let score = -per_token_logprobs.iter().sum::<f64>() / n;
        ScoredSequence {
            tokens,
            score,
            per_token_logprobs,
        }
    }
}

/// Negative mean left-to-right log-probability of the sequence.
pub fn score_autoregressive<P>(provider: &P, tokens: &[&str]) -> Result<ScoredSequence>
where
    P: TokenProbabilityProvider + ?Sized,
{
    if tokens.is_empty() {
        return Err(Error::arg("cannot score an empty token sequence"));
    }
    let logprobs = (0..tokens.len())
        .map(|i| provider.logprob_next(&tokens[..i], tokens[i]))
        .collect();
    Ok(ScoredSequence::from_logprobs(owned(tokens), logprobs))
}

/// Pseudo-log-likelihood score: mask one position of `maskable` at a time
/// and average the negated log-probabilities over `|maskable|` positions.
pub fn score_masked<P>(
    provider: &P,
    tokens: &[&str],
    maskable: &BTreeSet<usize>,
) -> Result<ScoredSequence>
where
    P: TokenProbabilityProvider + ?Sized,
{
    if maskable.is_empty() {
        return Err(Error::arg("maskable position set is empty"));
    }
    if let Some(&bad) = maskable.iter().find(|&&i| i >= tokens.len()) {
        return Err(Error::arg(format!(
            "maskable index {bad} out of range for {} tokens",
            tokens.len()
        )));
    }
    let logprobs = maskable
        .iter()
        .map(|&i| provider.logprob_masked(tokens, i))
        .collect();
    Ok(ScoredSequence::from_logprobs(owned(tokens), logprobs))
}

fn owned(tokens: &[&str]) -> Vec<String> {
    tokens.iter().map(|t| t.to_string()).collect()
}

pub fn all_positions(len: usize) -> BTreeSet<usize> {
    (0..len).collect()
}

/// Positions holding tokens outside the frozen stop-word list.
pub fn non_stop_positions(tokens: &[&str]) -> BTreeSet<usize> {
    tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| !is_stop_word(t))
        .map(|(i, _)| i)
        .collect()
}

/// Index of the lowest score; ties go to the lowest index.
pub fn select_answer(scores: &[f64]) -> Result<usize> {
    if scores.len() < 2 {
        return Err(Error::arg(format!("need at least 2 scores, got {}", scores.len())));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::arg(format!("non-finite score {bad}")));
    }
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s < scores[best] {
            best = i;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMode {
    #[serde(rename = "ar")]
    Autoregressive,
    #[serde(rename = "mlm")]
    Masked,
}

impl ScoreMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreMode::Autoregressive => "ar",
            ScoreMode::Masked => "mlm",
        }
    }
}

impl std::str::FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ar" => Ok(ScoreMode::Autoregressive),
            "mlm" => Ok(ScoreMode::Masked),
            other => Err(Error::arg(format!("unknown score mode {other:?}"))),
        }
    }
}

/// Denominator of the masked score when masking is restricted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskedDenominator {
    /// Number of masked positions.
    #[default]
    Masked,
    /// Full sequence length.
    SequenceLength,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreOptions {
    pub mode: ScoreMode,
    /// Masked mode only: mask non-stop tokens only.
    pub mask_stop_words: bool,
    pub denominator: MaskedDenominator,
}

impl ScoreOptions {
    pub fn new(mode: ScoreMode) -> Self {
        ScoreOptions {
            mode,
            mask_stop_words: false,
            denominator: MaskedDenominator::Masked,
        }
    }
}

/// Anything that can score a whole statement string.
///
/// Built-in providers tokenize with [`tokenize`]; external providers
/// tokenize on their side and return aligned log-probabilities.
pub trait StatementScorer: Send + Sync {
    fn score_text(&self, text: &str, opts: &ScoreOptions) -> Result<ScoredSequence>;
}

impl<P: TokenProbabilityProvider> StatementScorer for P {
    fn score_text(&self, text: &str, opts: &ScoreOptions) -> Result<ScoredSequence> {
        let owned = tokenize(text);
        let tokens: Vec<&str> = owned.iter().map(String::as_str).collect();
        match opts.mode {
            ScoreMode::Autoregressive => score_autoregressive(self, &tokens),
            ScoreMode::Masked => {
                let maskable = if opts.mask_stop_words {
                    non_stop_positions(&tokens)
                } else {
                    all_positions(tokens.len())
                };
                let mut scored = score_masked(self, &tokens, &maskable)?;
                if opts.denominator == MaskedDenominator::SequenceLength {
                    scored.score *= maskable.len() as f64 / tokens.len() as f64;
                }
                Ok(scored)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemScores {
    pub statements: Vec<String>,
    pub scores: Vec<f64>,
    pub predicted: usize,
}

/// Statement for each option of `item`, built with the template table.
pub fn item_statements(item: &QAItem, templates: &TemplateTable) -> Vec<String> {
    item.options
        .iter()
        .map(|o| templates.apply(&item.context, &item.question, o))
        .collect()
}

/// Score every option statement and pick the lowest-scoring one.
pub fn score_item(
    scorer: &(impl StatementScorer + ?Sized),
    item: &QAItem,
    templates: &TemplateTable,
    opts: &ScoreOptions,
) -> Result<ItemScores> {
    let wrap = |e: Error| Error::Item {
        id: item.id.clone(),
        source: Box::new(e),
    };
    let statements = item_statements(item, templates);
    let scores = statements
        .iter()
        .map(|s| scorer.score_text(s, opts).map(|r| r.score))
        .collect::<Result<Vec<_>>>()
        .map_err(wrap)?;
    let predicted = select_answer(&scores).map_err(wrap)?;
    Ok(ItemScores {
        statements,
        scores,
        predicted,
    })
}
