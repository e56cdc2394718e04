use std::fs;
use std::io::{self, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kgqa_core::elicit::{
    connecting_triple_ids, extract_spatial_subset, subset_summary_tsv, ConceptMatchConfig, SpatialLexicon,
};
use kgqa_core::eval::{
    emit_report, evaluate, load_benchmark_jsonl, majority_baseline, CiMethod, EvalSetup, Predictor,
    ProviderPredictor, ReportFormat, ScorerPredictor,
};
use kgqa_core::mask::{atomic_boundary, mask_corpus, MaskStrategy, DEFAULT_MASK_RATE};
use kgqa_core::scoring::{
    serve, ExternalProvider, MaskedDenominator, NgramConfig, NgramProvider, ScoreMode, ScoreOptions,
    StatementScorer, TokenProbabilityProvider, UniformProvider,
};
use kgqa_core::synth::{synthesize_qa, synthesize_spatial};
use kgqa_core::train::{train_mlm_style, train_scorer, LogLinearScorer, TrainConfig, DEFAULT_DIM};
use kgqa_core::{Error, KnowledgeGraph, SpatialClassTaxonomy, TemplateTable};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_PROVIDER: u8 = 3;

/// Knowledge-graph driven zero-shot question answering.
#[derive(Debug, Parser)]
#[command(name = "kgqa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a KG TSV, optionally keep triples seen at least N times, write TSV.
    Ingest {
        #[arg(long)]
        kg: PathBuf,
        #[arg(long)]
        min_count: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize multiple-choice items from KG triples.
    Synth {
        #[arg(long)]
        kg: PathBuf,
        /// Question/statement template TSV (defaults to the built-in table).
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        options: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize masked spatial-relation questions.
    SpatialSynth {
        #[arg(long)]
        kg: PathBuf,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
        /// Keep only triples seen at least this many times first.
        #[arg(long)]
        min_count: Option<usize>,
        #[arg(long, default_value_t = 4)]
        options: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a masked-LM corpus from whitespace-tokenized sentences.
    Mask {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MASK_RATE)]
        rate: f64,
        #[arg(long, value_enum, default_value_t = Strategy::All)]
        strategy: Strategy,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Zero-shot evaluation of a benchmark JSONL file.
    Eval(EvalArgs),
    /// Train the log-linear scorer with the marginal ranking loss.
    TrainMr {
        #[arg(long)]
        task: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_DIM)]
        dim: usize,
        #[arg(long)]
        templates: Option<PathBuf>,
        /// Write the weight checkpoint here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List KG triples connecting each question to each answer option.
    Elicit {
        #[arg(long)]
        kg: PathBuf,
        #[arg(long)]
        task: PathBuf,
        /// Require exact concept matches.
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = 4)]
        max_phrase_len: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Keep benchmark items that mention a spatial relation.
    SpatialSubset {
        #[arg(long, required = true, num_args = 1..)]
        task: Vec<PathBuf>,
        /// One surface form per line (defaults to the built-in lexicon).
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Match questions only, not answer options.
        #[arg(long)]
        questions_only: bool,
        /// Directory for the `<task>.spatial.jsonl` outputs.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Serve the provider protocol over stdin/stdout with an n-gram model.
    Serve {
        /// Training sentences, one per line.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// Listen on this TCP address instead of stdin/stdout.
        #[arg(long)]
        listen: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Strategy {
    All,
    Tail,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Ar,
    Mlm,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Denominator {
    Masked,
    Length,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Ci {
    T,
    Normal,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    task: PathBuf,
    /// builtin:<corpus.txt> | mlm:<train.jsonl> | external:<command> | uniform:<V>
    #[arg(long)]
    provider: Option<String>,
    /// Evaluate a train-mr checkpoint instead of a provider.
    #[arg(long, conflicts_with = "provider")]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Ar)]
    mode: Mode,
    /// Masked mode: mask only non-stop-word tokens.
    #[arg(long)]
    mask_stop_words: bool,
    #[arg(long, value_enum, default_value_t = Denominator::Masked)]
    denominator: Denominator,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long, default_value = "tsv")]
    report: String,
    #[arg(long, value_enum, default_value_t = Ci::T)]
    ci: Ci,
    #[arg(long, default_value_t = 3)]
    order: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long)]
    templates: Option<PathBuf>,
    /// KG used to break accuracy down by question type.
    #[arg(long)]
    kg: Option<PathBuf>,
    /// Model label in the report (defaults to the provider spec).
    #[arg(long)]
    model: Option<String>,
    /// Also report the majority-label baseline.
    #[arg(long)]
    baseline: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()) {
        Some(err) if err.is_provider() => EXIT_PROVIDER,
        Some(Error::InvalidArgument(_)) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn load_kg(path: &Path) -> Result<KnowledgeGraph> {
    KnowledgeGraph::parse_tsv_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_templates(path: Option<&Path>) -> Result<TemplateTable> {
    match path {
        Some(p) => TemplateTable::parse_tsv(&read(p)?).with_context(|| format!("parsing {}", p.display())),
        None => Ok(TemplateTable::embedded()),
    }
}

fn load_task(path: &Path) -> Result<Vec<kgqa_core::QAItem>> {
    load_benchmark_jsonl(path).with_context(|| format!("loading {}", path.display()))
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Ingest { kg, min_count, out } => {
            let mut graph = load_kg(&kg)?;
            let before = graph.len();
            if let Some(k) = min_count {
                graph = graph.filter_by_frequency(k)?;
            }
            log::info!("{before} triples read, {} written", graph.len());
            write_out(out.as_deref(), &graph.to_tsv())?;
        }
        Command::Synth { kg, templates, options, seed, out } => {
            let graph = load_kg(&kg)?;
            let table = load_templates(templates.as_deref())?;
            let items = synthesize_qa(&graph, &table, options, seed)?;
            log::info!("{} items from {} triples", items.len(), graph.len());
            write_out(out.as_deref(), &kgqa_core::qa::write_jsonl(&items))?;
        }
        Command::SpatialSynth { kg, taxonomy, min_count, options, seed, out } => {
            let mut graph = load_kg(&kg)?;
            if let Some(k) = min_count {
                graph = graph.filter_by_frequency(k)?;
            }
            let tax = match taxonomy {
                Some(p) => SpatialClassTaxonomy::parse_tsv(&read(&p)?)?,
                None => SpatialClassTaxonomy::embedded(),
            };
            let items = synthesize_spatial(&graph, &tax, options, seed)?;
            write_out(out.as_deref(), &kgqa_core::qa::write_jsonl(&items))?;
        }
        Command::Mask { input, rate, strategy, seed, out } => {
            let text = read(&input)?;
            let sentences: Vec<Vec<String>> = text
                .lines()
                .map(|l| l.split_whitespace().map(str::to_string).collect())
                .collect();
            let corpus = match strategy {
                Strategy::All => mask_corpus(&sentences, rate, seed, MaskStrategy::All, None)?,
                Strategy::Tail => {
                    let bounds = sentences
                        .iter()
                        .enumerate()
                        .map(|(i, s)| {
                            atomic_boundary(s).ok_or_else(|| {
                                anyhow!(Error::Parse {
                                    line: i + 1,
                                    message: "no ATOMIC relation token to locate the tail".into(),
                                })
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    mask_corpus(&sentences, rate, seed, MaskStrategy::TailOnly, Some(&bounds))?
                }
            };
            write_out(out.as_deref(), &corpus.to_tsv())?;
        }
        Command::Eval(args) => return run_eval(args),
        Command::TrainMr { task, eta, lr, epochs, seed, dim, templates, out } => {
            let items = load_task(&task)?;
            let table = load_templates(templates.as_deref())?;
            let cfg = TrainConfig { epochs, learning_rate: lr, margin: eta, seed, dim };
            let outcome = train_scorer(&items, &table, &cfg)?;
            println!(
                "items\t{}\nskipped\t{}\nfinal_loss\t{:.6}\ntrain_accuracy\t{:.4}",
                items.len(),
                outcome.skipped,
                outcome.final_loss,
                outcome.train_accuracy
            );
            if let Some(p) = out {
                fs::write(&p, outcome.scorer.to_checkpoint_tsv(&cfg))
                    .with_context(|| format!("writing {}", p.display()))?;
            }
        }
        Command::Elicit { kg, task, exact, max_phrase_len, out } => {
            let graph = load_kg(&kg)?;
            let items = load_task(&task)?;
            let cfg = ConceptMatchConfig {
                max_phrase_len,
                relaxed: !exact,
                ..ConceptMatchConfig::default()
            };
            cfg.validate()?;
            let mut text = String::from("item\toption\thead\trelation\ttail\n");
            for it in &items {
                let question = format!("{} {}", it.context, it.question);
                for (i, opt) in it.options.iter().enumerate() {
                    for id in connecting_triple_ids(&graph, &question, opt, &cfg) {
                        let t = &graph.triples()[id];
                        text.push_str(&format!("{}\t{i}\t{}\t{}\t{}\n", it.id, t.head, t.relation, t.tail));
                    }
                }
            }
            write_out(out.as_deref(), &text)?;
        }
        Command::SpatialSubset { task, lexicon, questions_only, out_dir } => {
            let lex = match lexicon {
                Some(p) => SpatialLexicon::parse(&read(&p)?),
                None => SpatialLexicon::embedded(&SpatialClassTaxonomy::embedded()),
            };
            let mut subsets = Vec::new();
            for path in &task {
                let items = load_task(path)?;
                let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("task").to_string();
                let subset = extract_spatial_subset(&items, &lex, !questions_only);
                if let Some(dir) = &out_dir {
                    let dest = dir.join(format!("{name}.spatial.jsonl"));
                    fs::write(&dest, kgqa_core::qa::write_jsonl(&subset.items))
                        .with_context(|| format!("writing {}", dest.display()))?;
                }
                subsets.push((name, subset));
            }
            let rows: Vec<(&str, &_)> = subsets.iter().map(|(n, s)| (n.as_str(), s)).collect();
            write_out(None, &subset_summary_tsv(&rows))?;
        }
        Command::Serve { corpus, order, alpha, listen } => {
            let text = read(&corpus)?;
            let provider = NgramProvider::train(text.lines(), NgramConfig { order, alpha })?;
            let name = format!("ngram-{order}");
            match listen {
                None => serve(io::stdin().lock(), io::stdout().lock(), &provider, &name, provider.vocab_size())?,
                Some(addr) => {
                    let listener = TcpListener::bind(&addr).with_context(|| format!("binding {addr}"))?;
                    eprintln!("listening on {}", listener.local_addr()?);
                    for stream in listener.incoming() {
                        let stream = stream?;
                        let reader = BufReader::new(stream.try_clone()?);
                        if let Err(e) = serve(reader, stream, &provider, &name, provider.vocab_size()) {
                            log::warn!("connection closed: {e}");
                        }
                    }
                }
            }
        }
    }
    Ok(0)
}

enum Scorer {
    Builtin(Box<dyn StatementScorer>),
    External(ExternalProvider),
}

impl Scorer {
    fn as_dyn(&self) -> &dyn StatementScorer {
        match self {
            Scorer::Builtin(s) => s.as_ref(),
            Scorer::External(p) => p,
        }
    }
}

fn build_scorer(spec: &str, cfg: NgramConfig, templates: &TemplateTable) -> Result<Scorer> {
    let (kind, arg) = spec
        .split_once(':')
        .ok_or_else(|| Error::InvalidArgument(format!("provider spec {spec:?} has no ':'")))?;
    Ok(match kind {
        "builtin" => {
            let text = read(Path::new(arg))?;
            Scorer::Builtin(Box::new(NgramProvider::train(text.lines(), cfg)?))
        }
        "mlm" => {
            let items = load_task(Path::new(arg))?;
            Scorer::Builtin(Box::new(train_mlm_style(&items, templates, cfg)?))
        }
        "uniform" => {
            let v: usize = arg
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad vocabulary size {arg:?}")))?;
            if v == 0 {
                bail!(Error::InvalidArgument("vocabulary size must be >= 1".into()));
            }
            Scorer::Builtin(Box::new(UniformProvider::new(v)))
        }
        "external" => {
            let p = ExternalProvider::spawn(arg)?;
            log::info!("external provider {} (vocab {})", p.name(), p.vocab_size());
            Scorer::External(p)
        }
        other => bail!(Error::InvalidArgument(format!("unknown provider kind {other:?}"))),
    })
}

fn run_eval(args: EvalArgs) -> Result<u8> {
    let items = load_task(&args.task)?;
    let templates = load_templates(args.templates.as_deref())?;
    let format: ReportFormat = args.report.parse()?;
    let kg = args.kg.as_deref().map(load_kg).transpose()?;
    let ci = match args.ci {
        Ci::T => CiMethod::StudentT,
        Ci::Normal => CiMethod::Normal,
    };
    let task = args.task.file_stem().and_then(|s| s.to_str()).unwrap_or("task").to_string();
    let opts = ScoreOptions {
        mode: match args.mode {
            Mode::Ar => ScoreMode::Autoregressive,
            Mode::Mlm => ScoreMode::Masked,
        },
        mask_stop_words: args.mask_stop_words,
        denominator: match args.denominator {
            Denominator::Masked => MaskedDenominator::Masked,
            Denominator::Length => MaskedDenominator::SequenceLength,
        },
    };
    let model = args
        .model
        .clone()
        .or_else(|| args.provider.clone())
        .or_else(|| args.checkpoint.as_ref().map(|p| p.display().to_string()))
        .unwrap_or_default();
    let setup = EvalSetup { model: &model, task: &task, seeds: &args.seeds, ci, kg: kg.as_ref() };

    let report = match (&args.provider, &args.checkpoint) {
        (Some(spec), None) => {
            let scorer = build_scorer(spec, NgramConfig { order: args.order, alpha: args.alpha }, &templates)?;
            let scorer = scorer.as_dyn();
            evaluate(&setup, &items, |_| {
                Ok(Box::new(ProviderPredictor { scorer, templates: &templates, opts }) as Box<dyn Predictor>)
            })?
        }
        (None, Some(path)) => {
            let scorer = LogLinearScorer::from_checkpoint_tsv(&read(path)?)?;
            evaluate(&setup, &items, |_| {
                Ok(Box::new(ScorerPredictor { scorer: scorer.clone(), templates: templates.clone() })
                    as Box<dyn Predictor>)
            })?
        }
        _ => bail!(Error::InvalidArgument("give exactly one of --provider or --checkpoint".into())),
    };

    let mut reports = vec![report];
    if args.baseline {
        let acc = majority_baseline(&items)?;
        let mut base = reports[0].clone();
        base.model = "majority".into();
        base.accuracy = acc;
        base.mean_accuracy = acc;
        base.seeds = vec![(0, acc)];
        base.ci_half_width = 0.0;
        base.per_type.clear();
        base.failures.clear();
        reports.push(base);
    }
    write_out(None, &emit_report(&reports, format))?;
    let failures = reports[0].failures.len();
    if failures > 0 {
        eprintln!("{failures} item predictions failed and were counted incorrect");
        return Ok(EXIT_PROVIDER);
    }
    Ok(0)
}
