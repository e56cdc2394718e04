//! Marginal-ranking training of a hashed log-linear scorer, and the
//! MLM-style alternative that fits an n-gram model on gold statements.
//!
//! Sign convention: training works on plausibilities (higher is better),
//! which are the negation of provider scores (lower is better). The ranking
//! loss rewards a high gold plausibility; prediction is the argmax
//! plausibility, i.e. `select_answer` over the negated values.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::qa::QAItem;
use crate::scoring::{item_statements, select_answer, NgramConfig, NgramProvider};
use crate::text::{fnv1a, tokenize};
use crate::verbalize::TemplateTable;

fn check_ranking_args(scores: &[f64], gold: usize, margin: f64) -> Result<()> {
    if scores.len() < 2 {
        return Err(Error::arg(format!("need at least 2 scores, got {}", scores.len())));
    }
    if gold >= scores.len() {
        return Err(Error::arg(format!(
            "gold index {gold} out of range for {} scores",
            scores.len()
        )));
    }
    if margin.is_nan() || margin < 0.0 {
        return Err(Error::arg(format!("margin must be >= 0, got {margin}")));
    }
    Ok(())
}

/// `(1/m) * sum_{i != y} max(0, margin - s[y] + s[i])`.
pub fn mr_loss(scores: &[f64], gold: usize, margin: f64) -> Result<f64> {
    check_ranking_args(scores, gold, margin)?;
    let m = scores.len() as f64;
    let sum: f64 = scores
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != gold)
        .map(|(_, s)| (margin - scores[gold] + s).max(0.0))
        .sum();
    Ok(sum / m)
}

/// Subgradient of [`mr_loss`]. A hinge argument of exactly zero contributes
/// nothing.
pub fn mr_loss_grad(scores: &[f64], gold: usize, margin: f64) -> Result<Vec<f64>> {
    check_ranking_args(scores, gold, margin)?;
    let inv_m = 1.0 / scores.len() as f64;
    let mut grad = vec![0.0; scores.len()];
    for (i, s) in scores.iter().enumerate() {
        if i != gold && margin - scores[gold] + s > 0.0 {
            grad[i] += inv_m;
            grad[gold] -= inv_m;
        }
    }
    Ok(grad)
}

pub const DEFAULT_DIM: usize = 1 << 16;

/// Sparse hashed unigram + bigram counts, keyed by weight index.
pub type Features = BTreeMap<usize, f64>;

/// Linear plausibility over hashed n-gram features of a statement.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLinearScorer {
    weights: Vec<f64>,
}

impl LogLinearScorer {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "feature dimension must be positive");
        LogLinearScorer {
            weights: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn features(&self, statement: &str) -> Features {
        let tokens = tokenize(statement);
        let dim = self.weights.len() as u64;
        let mut feats = Features::new();
        let mut add = |name: String| {
            *feats.entry((fnv1a(name.as_bytes()) % dim) as usize).or_default() += 1.0;
        };
        for t in &tokens {
            add(format!("u:{t}"));
        }
        for w in tokens.windows(2) {
            add(format!("b:{} {}", w[0], w[1]));
        }
        feats
    }

    pub fn plausibility_of(&self, feats: &Features) -> f64 {
        feats.iter().map(|(&i, &c)| self.weights[i] * c).sum()
    }

    pub fn plausibility(&self, statement: &str) -> f64 {
        self.plausibility_of(&self.features(statement))
    }

    /// Index of the most plausible option (lowest index on ties).
    pub fn predict(&self, item: &QAItem, templates: &TemplateTable) -> Result<usize> {
        let negated: Vec<f64> = item_statements(item, templates)
            .iter()
            .map(|s| -self.plausibility(s))
            .collect();
        select_answer(&negated)
    }

    fn step(&mut self, feats: &[Features], grad: &[f64], lr: f64) {
        for (f, g) in feats.iter().zip(grad) {
            if *g == 0.0 {
                continue;
            }
            for (&i, &c) in f {
                self.weights[i] -= lr * g * c;
            }
        }
    }

    /// Checkpoint: `#`-prefixed `key<TAB>value` header lines, then one
    /// weight per line.
    pub fn to_checkpoint_tsv(&self, cfg: &TrainConfig) -> String {
        let mut out = format!(
            "# dim\t{}\n# seed\t{}\n# eta\t{}\n# lr\t{}\n# epochs\t{}\n",
            self.dim(),
            cfg.seed,
            cfg.margin,
            cfg.learning_rate,
            cfg.epochs
        );
        for w in &self.weights {
            out.push_str(&format!("{w}\n"));
        }
        out
    }

    pub fn from_checkpoint_tsv(text: &str) -> Result<Self> {
        let mut dim = None;
        let mut weights = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if let Some(header) = line.strip_prefix("# ") {
                if let Some(("dim", v)) = header.split_once('\t') {
                    dim = Some(v.parse::<usize>().map_err(|e| Error::parse(i + 1, e.to_string()))?);
                }
                continue;
            }
            let w: f64 = line
                .trim()
                .parse()
                .map_err(|_| Error::parse(i + 1, format!("bad weight {line:?}")))?;
            weights.push(w);
        }
        match dim {
            Some(d) if d == weights.len() && d > 0 => Ok(LogLinearScorer { weights }),
            Some(d) => Err(Error::arg(format!("header says {d} weights, found {}", weights.len()))),
            None => Err(Error::arg("checkpoint has no dim header")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub margin: f64,
    pub seed: u64,
    pub dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            learning_rate: 0.1,
            margin: 1.0,
            seed: 0,
            dim: DEFAULT_DIM,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub scorer: LogLinearScorer,
    /// Items skipped because every option verbalized to the same statement.
    pub skipped: usize,
    /// Mean ranking loss over the trained items after the last epoch.
    pub final_loss: f64,
    pub train_accuracy: f64,
}

struct Prepared {
    feats: Vec<Features>,
    gold: usize,
}

/// Plain SGD, batch size 1, items reshuffled each epoch from `cfg.seed`.
pub fn train_scorer(items: &[QAItem], templates: &TemplateTable, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if cfg.epochs == 0 {
        return Err(Error::arg("epochs must be >= 1"));
    }
    if !cfg.learning_rate.is_finite() || cfg.learning_rate < 0.0 {
        return Err(Error::arg(format!("learning rate must be >= 0, got {}", cfg.learning_rate)));
    }
    for item in items {
        item.validate()?;
    }
    let mut scorer = LogLinearScorer::new(cfg.dim);
    let mut skipped = 0;
    let mut prepared = Vec::with_capacity(items.len());
    for item in items {
        let statements = item_statements(item, templates);
        let distinct: BTreeSet<Vec<String>> = statements.iter().map(|s| tokenize(s)).collect();
        if distinct.len() < 2 {
            skipped += 1;
            continue;
        }
        prepared.push(Prepared {
            feats: statements.iter().map(|s| scorer.features(s)).collect(),
            gold: item.answer_index,
        });
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} items whose options verbalize identically");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let p = &prepared[i];
            let plaus: Vec<f64> = p.feats.iter().map(|f| scorer.plausibility_of(f)).collect();
            let grad = mr_loss_grad(&plaus, p.gold, cfg.margin)?;
            scorer.step(&p.feats, &grad, cfg.learning_rate);
        }
    }

    let mut loss = 0.0;
    let mut correct = 0;
    for p in &prepared {
        let plaus: Vec<f64> = p.feats.iter().map(|f| scorer.plausibility_of(f)).collect();
        loss += mr_loss(&plaus, p.gold, cfg.margin)?;
        let negated: Vec<f64> = plaus.iter().map(|s| -s).collect();
        if select_answer(&negated)? == p.gold {
            correct += 1;
        }
    }
    let n = prepared.len().max(1) as f64;
    Ok(TrainOutcome {
        scorer,
        skipped,
        final_loss: loss / n,
        train_accuracy: correct as f64 / n,
    })
}

/// Gold statements (context + question + correct option) for MLM-style training.
pub fn mlm_corpus(items: &[QAItem], templates: &TemplateTable) -> Vec<String> {
    items
        .iter()
        .map(|it| templates.apply(&it.context, &it.question, it.gold()))
        .collect()
}

/// Fit an n-gram provider on the gold statements of `items`.
pub fn train_mlm_style(items: &[QAItem], templates: &TemplateTable, config: NgramConfig) -> Result<NgramProvider> {
    if items.is_empty() {
        return Err(Error::arg("cannot train on an empty item list"));
    }
    for item in items {
        item.validate()?;
    }
    let corpus = mlm_corpus(items, templates);
    NgramProvider::train(corpus.iter().map(String::as_str), config)
}
