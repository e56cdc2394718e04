//! Masked pretraining corpus generation.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::synth::MASK_TOKEN;
use crate::text::hash64;
use crate::verbalize::{is_atomic_relation, BLANK_TOKEN};

pub const DEFAULT_MASK_RATE: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskStrategy {
    All,
    /// Only positions at or after the tail boundary are eligible.
    TailOnly,
}

/// Where the head ends and the tail starts in a verbalized triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpanBoundary {
    pub head_end: usize,
    pub tail_start: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskedCorpusRecord {
    pub original_tokens: Vec<String>,
    pub masked_tokens: Vec<String>,
    pub mask_positions: Vec<usize>,
    pub span_tag: Option<SpanBoundary>,
}

impl MaskedCorpusRecord {
    pub fn to_tsv(&self) -> String {
        let positions: Vec<String> = self.mask_positions.iter().map(usize::to_string).collect();
        format!(
            "{}\t{}\t{}",
            self.original_tokens.join(" "),
            self.masked_tokens.join(" "),
            positions.join(",")
        )
    }
}

#[derive(Debug, Clone)]
pub struct MaskedCorpus {
    pub records: Vec<MaskedCorpusRecord>,
    /// Empty input sentences (emitted with zero masks).
    pub empty_sentences: usize,
}

impl MaskedCorpus {
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_tsv());
            out.push('\n');
        }
        out
    }
}

/// Relation special tokens and `<blank>` are structure, never mask targets.
pub fn is_structural(token: &str) -> bool {
    token == BLANK_TOKEN
        || (token.len() > 2 && token.starts_with('<') && token.ends_with('>'))
}

/// Boundary around the first ATOMIC relation token (`<xWant>` etc.).
pub fn atomic_boundary(tokens: &[String]) -> Option<SpanBoundary> {
    tokens.iter().position(|t| {
        t.strip_prefix('<')
            .and_then(|r| r.strip_suffix('>'))
            .is_some_and(is_atomic_relation)
    })
    .map(|r| SpanBoundary {
        head_end: r,
        tail_start: r + 1,
    })
}

/// Number of positions masked out of `eligible`: `round(rate * eligible)`,
/// at least one when anything is eligible.
pub fn mask_quota(rate: f64, eligible: usize) -> usize {
    if eligible == 0 {
        return 0;
    }
    ((rate * eligible as f64).round() as usize).clamp(1, eligible)
}

pub fn mask_corpus(
    sentences: &[Vec<String>],
    rate: f64,
    seed: u64,
    strategy: MaskStrategy,
    boundaries: Option<&[SpanBoundary]>,
) -> Result<MaskedCorpus> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::arg(format!("mask rate must be in (0, 1], got {rate}")));
    }
    let boundaries = match (strategy, boundaries) {
        (MaskStrategy::TailOnly, None) => {
            return Err(Error::arg("tail-only masking needs a tail boundary per sentence"))
        }
        (MaskStrategy::TailOnly, Some(b)) if b.len() != sentences.len() => {
            return Err(Error::arg(format!(
                "{} boundaries for {} sentences",
                b.len(),
                sentences.len()
            )))
        }
        (MaskStrategy::TailOnly, Some(b)) => Some(b),
        (MaskStrategy::All, _) => None,
    };
    let records: Vec<MaskedCorpusRecord> = sentences
        .par_iter()
        .enumerate()
        .map(|(i, tokens)| {
            let boundary = boundaries.map(|b| b[i]);
            mask_sentence(tokens, rate, hash64(seed, i as u64), boundary)
        })
        .collect();
    let empty_sentences = sentences.iter().filter(|s| s.is_empty()).count();
    if empty_sentences > 0 {
        log::warn!("{empty_sentences} empty sentences in masking input");
    }
    Ok(MaskedCorpus {
        records,
        empty_sentences,
    })
}

fn mask_sentence(
    tokens: &[String],
    rate: f64,
    seed: u64,
    boundary: Option<SpanBoundary>,
) -> MaskedCorpusRecord {
    let start = boundary.map_or(0, |b| b.tail_start);
    let eligible: Vec<usize> = (start..tokens.len())
        .filter(|&i| !is_structural(&tokens[i]))
        .collect();
    let quota = mask_quota(rate, eligible.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions: Vec<usize> = index::sample(&mut rng, eligible.len(), quota)
        .into_iter()
        .map(|k| eligible[k])
        .collect();
    positions.sort_unstable();
    let mut masked = tokens.to_vec();
    for &p in &positions {
        masked[p] = MASK_TOKEN.to_string();
    }
    MaskedCorpusRecord {
        original_tokens: tokens.to_vec(),
        masked_tokens: masked,
        mask_positions: positions,
        span_tag: boundary,
    }
}
