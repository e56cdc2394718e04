//! Zero-shot evaluation: benchmark loading, baselines, multi-seed accuracy
//! with confidence intervals, per-question-type breakdowns, report tables.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::elicit::classify_question_type;
use crate::error::{Error, Result};
use crate::kg::KnowledgeGraph;
use crate::qa::{read_jsonl, QAItem};
use crate::scoring::{score_item, ScoreOptions, StatementScorer};
use crate::train::LogLinearScorer;
use crate::verbalize::TemplateTable;

pub const OTHER_TYPE: &str = "other";

pub fn load_benchmark_jsonl(path: impl AsRef<Path>) -> Result<Vec<QAItem>> {
    let file = File::open(path.as_ref())?;
    read_jsonl(BufReader::new(file))
}

/// Accuracy of always predicting the most frequent gold index (lowest index
/// on ties).
pub fn majority_baseline(items: &[QAItem]) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::arg("majority baseline needs at least one item"));
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for it in items {
        *counts.entry(it.answer_index).or_default() += 1;
    }
    let modal = counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(_, c)| *c)
        .unwrap_or(0);
    Ok(modal as f64 / items.len() as f64)
}

/// Anything that picks an option index for an item.
pub trait Predictor: Send + Sync {
    fn predict(&self, item: &QAItem) -> Result<usize>;
}

/// Zero-shot prediction with a statement scorer (lowest score wins).
pub struct ProviderPredictor<'a, S: ?Sized> {
    pub scorer: &'a S,
    pub templates: &'a TemplateTable,
    pub opts: ScoreOptions,
}

impl<S: StatementScorer + ?Sized> Predictor for ProviderPredictor<'_, S> {
    fn predict(&self, item: &QAItem) -> Result<usize> {
        score_item(self.scorer, item, self.templates, &self.opts).map(|r| r.predicted)
    }
}

/// Prediction with a trained ranking scorer (highest plausibility wins).
pub struct ScorerPredictor {
    pub scorer: LogLinearScorer,
    pub templates: TemplateTable,
}

impl Predictor for ScorerPredictor {
    fn predict(&self, item: &QAItem) -> Result<usize> {
        self.scorer.predict(item, &self.templates)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CiMethod {
    #[default]
    StudentT,
    Normal,
}

/// 95% half-width of the mean of `values`: `q * sd / sqrt(k)` with `q` the
/// 0.975 quantile of Student-t (k - 1 df) or the standard normal. Zero for
/// a single value.
pub fn ci_half_width(values: &[f64], method: CiMethod) -> f64 {
    let k = values.len();
    if k < 2 {
        return 0.0;
    }
    let kf = k as f64;
    let mean = values.iter().sum::<f64>() / kf;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (kf - 1.0);
    if var == 0.0 {
        return 0.0;
    }
    let q = match method {
        CiMethod::StudentT => StudentsT::new(0.0, 1.0, kf - 1.0)
            .expect("valid t distribution")
            .inverse_cdf(0.975),
        CiMethod::Normal => Normal::new(0.0, 1.0).unwrap().inverse_cdf(0.975),
    };
    q * var.sqrt() / kf.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TypeStats {
    pub count: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Per-question-type accuracy. The type is the relation linking the item's
/// question concept (`meta.question_concept`) to its gold option; items
/// without a concept or a linking relation fall under `other`.
pub fn per_type_accuracy(
    items: &[QAItem],
    predictions: &[usize],
    kg: &KnowledgeGraph,
) -> Result<BTreeMap<String, TypeStats>> {
    if items.len() != predictions.len() {
        return Err(Error::arg(format!(
            "{} predictions for {} items",
            predictions.len(),
            items.len()
        )));
    }
    let mut tally: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (item, &pred) in items.iter().zip(predictions) {
        let ty = item
            .meta
            .question_concept
            .as_deref()
            .and_then(|qc| classify_question_type(kg, qc, item.gold()))
            .unwrap_or_else(|| OTHER_TYPE.to_string());
        let e = tally.entry(ty).or_default();
        e.0 += 1;
        e.1 += usize::from(pred == item.answer_index);
    }
    Ok(tally
        .into_iter()
        .map(|(ty, (count, correct))| {
            let stats = TypeStats {
                count,
                correct,
                accuracy: correct as f64 / count as f64,
            };
            (ty, stats)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub model: String,
    pub task: String,
    pub n_items: usize,
    /// Accuracy of the first seed's run.
    pub accuracy: f64,
    /// Breakdown of the first seed's predictions (empty without a KG).
    pub per_type: BTreeMap<String, TypeStats>,
    pub seeds: Vec<(u64, f64)>,
    pub mean_accuracy: f64,
    pub ci_half_width: f64,
    pub ci_method: CiMethod,
    /// Ids of items whose prediction failed, per seed.
    pub failures: Vec<(u64, String)>,
}

#[derive(Debug, Clone)]
pub struct EvalSetup<'a> {
    pub model: &'a str,
    pub task: &'a str,
    pub seeds: &'a [u64],
    pub ci: CiMethod,
    pub kg: Option<&'a KnowledgeGraph>,
}

/// Run `build(seed)` once per seed and score every item with the result.
/// A failed item counts as incorrect and is listed in `failures`.
pub fn evaluate<'p, F>(setup: &EvalSetup<'_>, items: &[QAItem], build: F) -> Result<EvalReport>
where
    F: Fn(u64) -> Result<Box<dyn Predictor + 'p>>,
{
    if items.is_empty() {
        return Err(Error::arg("no items to evaluate"));
    }
    if setup.seeds.is_empty() {
        return Err(Error::arg("at least one seed is required"));
    }
    let mut seeds = Vec::with_capacity(setup.seeds.len());
    let mut failures = Vec::new();
    let mut first_predictions = None;
    for &seed in setup.seeds {
        let predictor = build(seed)?;
        let outcomes: Vec<Result<usize>> = items.par_iter().map(|it| predictor.predict(it)).collect();
        let mut correct = 0;
        let mut predictions = Vec::with_capacity(items.len());
        for (item, outcome) in items.iter().zip(outcomes) {
            match outcome {
                Ok(p) => {
                    correct += usize::from(p == item.answer_index);
                    predictions.push(p);
                }
                Err(e) => {
                    log::warn!("seed {seed}: {e}");
                    failures.push((seed, item.id.clone()));
                    predictions.push(usize::MAX);
                }
            }
        }
        seeds.push((seed, correct as f64 / items.len() as f64));
        first_predictions.get_or_insert(predictions);
    }
    let accs: Vec<f64> = seeds.iter().map(|s| s.1).collect();
    let per_type = match (setup.kg, &first_predictions) {
        (Some(kg), Some(preds)) => per_type_accuracy(items, preds, kg)?,
        _ => BTreeMap::new(),
    };
    Ok(EvalReport {
        model: setup.model.to_string(),
        task: setup.task.to_string(),
        n_items: items.len(),
        accuracy: accs[0],
        per_type,
        mean_accuracy: accs.iter().sum::<f64>() / accs.len() as f64,
        ci_half_width: ci_half_width(&accs, setup.ci),
        ci_method: setup.ci,
        seeds,
        failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Tsv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(ReportFormat::Tsv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            other => Err(Error::arg(format!("unknown report format {other:?}"))),
        }
    }
}

fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

fn ci_label(method: CiMethod) -> &'static str {
    match method {
        CiMethod::StudentT => "Student-t, k-1 degrees of freedom",
        CiMethod::Normal => "normal approximation",
    }
}

fn markdown_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count().max(3)).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        format!("| {} |\n", padded.join(" | "))
    };
    let mut out = line(header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
    for row in rows {
        out.push_str(&line(row));
    }
    out
}

/// Render reports. Markdown lays them out as a model x task grid of
/// `mean (±half-width)` percentages; TSV lists one row per report followed
/// by per-type rows.
pub fn emit_report(reports: &[EvalReport], format: ReportFormat) -> String {
    match format {
        ReportFormat::Tsv => emit_tsv(reports),
        ReportFormat::Markdown => emit_markdown(reports),
    }
}

fn emit_tsv(reports: &[EvalReport]) -> String {
    let mut out = String::from("model\ttask\tn_items\taccuracy\tmean_accuracy\tci95_half_width\tseeds\tfailures\n");
    for r in reports {
        let seeds: Vec<String> = r.seeds.iter().map(|(s, a)| format!("{s}:{a:.4}")).collect();
        out.push_str(&format!(
            "{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{}\t{}\n",
            r.model,
            r.task,
            r.n_items,
            r.accuracy,
            r.mean_accuracy,
            r.ci_half_width,
            seeds.join(","),
            r.failures.len()
        ));
    }
    if reports.iter().any(|r| !r.per_type.is_empty()) {
        out.push_str("\nmodel\ttask\ttype\tcount\taccuracy\n");
        for r in reports {
            for (ty, s) in &r.per_type {
                out.push_str(&format!("{}\t{}\t{ty}\t{}\t{:.4}\n", r.model, r.task, s.count, s.accuracy));
            }
        }
    }
    out
}

fn first_seen<'a>(values: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

fn emit_markdown(reports: &[EvalReport]) -> String {
    let models = first_seen(reports.iter().map(|r| r.model.as_str()));
    let tasks = first_seen(reports.iter().map(|r| r.task.as_str()));
    let mut header = vec!["Model".to_string()];
    header.extend(tasks.iter().map(|t| t.to_string()));
    let rows: Vec<Vec<String>> = models
        .iter()
        .map(|m| {
            let mut row = vec![m.to_string()];
            for t in &tasks {
                let cell = reports
                    .iter()
                    .find(|r| r.model == *m && r.task == *t)
                    .map_or_else(
                        || "-".to_string(),
                        |r| format!("{} (±{})", pct(r.mean_accuracy), pct(r.ci_half_width)),
                    );
                row.push(cell);
            }
            row
        })
        .collect();
    let mut out = markdown_table(&header, &rows);
    if let Some(r) = reports.first() {
        out.push_str(&format!(
            "\nMean accuracy (%) over {} seed(s); 95% CI half-width ({}).\n",
            r.seeds.len(),
            ci_label(r.ci_method)
        ));
    }
    for r in reports.iter().filter(|r| !r.per_type.is_empty()) {
        out.push('\n');
        out.push_str(&per_type_table(r, None));
    }
    out
}

/// Per-type accuracies as columns, optionally with the delta against a
/// baseline run of the same task.
pub fn per_type_table(report: &EvalReport, baseline: Option<&EvalReport>) -> String {
    let types: Vec<&String> = report.per_type.keys().collect();
    let mut header = vec!["Model".to_string()];
    header.extend(types.iter().map(|t| format!("{t} (n={})", report.per_type[*t].count)));
    let mut row = vec![format!("{} / {}", report.model, report.task)];
    for t in &types {
        let acc = report.per_type[*t].accuracy;
        let cell = match baseline.and_then(|b| b.per_type.get(*t)) {
            Some(b) => format!("{} ({:+.1})", pct(acc), 100.0 * (acc - b.accuracy)),
            None => pct(acc),
        };
        row.push(cell);
    }
    markdown_table(&header, &[row])
}
