use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::text::tokenize;

use super::TokenProbabilityProvider;

pub const UNK: &str = "<unk>";
pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";

/// Every token gets probability 1/V in every context.
#[derive(Debug, Clone, Copy)]
pub struct UniformProvider {
    vocab_size: usize,
}

impl UniformProvider {
    pub fn new(vocab_size: usize) -> Self {
        assert!(vocab_size >= 1, "vocabulary must be non-empty");
        UniformProvider { vocab_size }
    }
}

impl TokenProbabilityProvider for UniformProvider {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn logprob_next(&self, _prefix: &[&str], _target: &str) -> f64 {
        -(self.vocab_size as f64).ln()
    }

    fn logprob_masked(&self, _tokens: &[&str], _index: usize) -> f64 {
        -(self.vocab_size as f64).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NgramConfig {
    pub order: usize,
    pub alpha: f64,
}

impl Default for NgramConfig {
    fn default() -> Self {
        NgramConfig {
            order: 3,
            alpha: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct ContextCounts {
    total: u64,
    next: HashMap<u32, u64>,
}

/// Add-alpha smoothed n-gram model:
/// `P(t | c) = (count(c, t) + alpha) / (count(c) + alpha * V)`
/// over the `order - 1` preceding tokens, padded with `<bos>`.
#[derive(Debug, Clone)]
pub struct NgramProvider {
    config: NgramConfig,
    vocab: Vec<String>,
    ids: HashMap<String, u32>,
    contexts: HashMap<Vec<u32>, ContextCounts>,
    unk: u32,
    bos: u32,
    eos: u32,
}

impl NgramProvider {
    /// Train on raw sentences, tokenized with the built-in tokenizer.
    pub fn train<'a, I>(sentences: I, config: NgramConfig) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let tokenized: Vec<Vec<String>> = sentences.into_iter().map(tokenize).collect();
        Self::train_tokens(&tokenized, config)
    }

    pub fn train_tokens(sentences: &[Vec<String>], config: NgramConfig) -> Result<Self> {
        if config.order == 0 {
            return Err(Error::arg("n-gram order must be >= 1"));
        }
        if !(config.alpha.is_finite() && config.alpha > 0.0) {
            return Err(Error::arg(format!("smoothing constant must be > 0, got {}", config.alpha)));
        }
        let mut words: BTreeSet<&str> = sentences.iter().flatten().map(String::as_str).collect();
        words.extend([UNK, BOS, EOS]);
        let vocab: Vec<String> = words.into_iter().map(str::to_string).collect();
        let ids: HashMap<String, u32> = vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        let mut model = NgramProvider {
            config,
            unk: ids[UNK],
            bos: ids[BOS],
            eos: ids[EOS],
            vocab,
            ids,
            contexts: HashMap::new(),
        };
        let k = config.order - 1;
        for sentence in sentences {
            let mut padded: Vec<u32> = vec![model.bos; k];
            padded.extend(sentence.iter().map(|w| model.ids[w]));
            padded.push(model.eos);
            for pos in k..padded.len() {
                let entry = model.contexts.entry(padded[pos - k..pos].to_vec()).or_default();
                entry.total += 1;
                *entry.next.entry(padded[pos]).or_default() += 1;
            }
        }
        Ok(model)
    }

    pub fn config(&self) -> NgramConfig {
        self.config
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(self.unk)
    }

    fn ids_of(&self, tokens: &[&str]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    /// The `order - 1` ids preceding position `pos` of `seq`, `<bos>`-padded.
    fn context_into(&self, seq: &[u32], pos: usize, buf: &mut Vec<u32>) {
        let k = self.config.order - 1;
        buf.clear();
        for back in (1..=k).rev() {
            buf.push(if pos >= back { seq[pos - back] } else { self.bos });
        }
    }

    fn logprob_ids(&self, context: &[u32], target: u32) -> f64 {
        let v = self.vocab.len() as f64;
        let alpha = self.config.alpha;
        let (count, total) = match self.contexts.get(context) {
            Some(c) => (c.next.get(&target).copied().unwrap_or(0), c.total),
            None => (0, 0),
        };
        ((count as f64 + alpha) / (total as f64 + alpha * v)).ln()
    }

    /// Raw training count of `target` after `context` (exactly `order - 1` tokens).
    pub fn count(&self, context: &[&str], target: &str) -> u64 {
        self.contexts
            .get(&self.ids_of(context))
            .and_then(|c| c.next.get(&self.id(target)).copied())
            .unwrap_or(0)
    }

    /// Total training count of `context`.
    pub fn context_count(&self, context: &[&str]) -> u64 {
        self.contexts.get(&self.ids_of(context)).map_or(0, |c| c.total)
    }

    /// Sum of log-probabilities of the n-gram factors touching position
    /// `index` when it holds `candidate`.
    fn local_logprob(&self, seq: &mut [u32], index: usize, candidate: u32, buf: &mut Vec<u32>) -> f64 {
        seq[index] = candidate;
        let end = (index + self.config.order).min(seq.len());
        let mut total = 0.0;
        for j in index..end {
            self.context_into(seq, j, buf);
            total += self.logprob_ids(buf, seq[j]);
        }
        total
    }
}

impl TokenProbabilityProvider for NgramProvider {
    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn logprob_next(&self, prefix: &[&str], target: &str) -> f64 {
        let mut seq = self.ids_of(prefix);
        seq.push(self.id(target));
        let mut ctx = Vec::with_capacity(self.config.order);
        self.context_into(&seq, prefix.len(), &mut ctx);
        self.logprob_ids(&ctx, seq[prefix.len()])
    }

    /// The left-to-right joint renormalized over every vocabulary entry at
    /// `index`; only the factors that see position `index` contribute.
    fn logprob_masked(&self, tokens: &[&str], index: usize) -> f64 {
        let mut seq = self.ids_of(tokens);
        let actual = seq[index];
        let mut buf = Vec::with_capacity(self.config.order);
        let local: Vec<f64> = (0..self.vocab.len() as u32)
            .map(|w| self.local_logprob(&mut seq, index, w, &mut buf))
            .collect();
        let max = local.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + local.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        local[actual as usize] - log_z
    }
}
