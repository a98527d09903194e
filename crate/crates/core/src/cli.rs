//! The `cuneilid` command line.
//!
//! Exit codes: 0 on success, 1 for data errors (unreadable or malformed
//! input, unknown readings in strict mode), 2 for usage errors.

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::classify::{EnsembleConfig, Method, MethodConfig, Predictor};
use crate::corpus::{self, normalize_text, LabeledCorpus};
use crate::eval::{self, describe, GridSpec};
use crate::fsutil::write_atomic;
use crate::models::{self, NGramRange, MAX_ORDER, MODEL_FORMAT_VERSION};
use crate::signmap::{self, ConversionMode, SignList};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "cuneilid", version, about = "Language and dialect identification for cuneiform text lines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert ATF transliteration lines on stdin into Unicode cuneiform.
    Convert(ConvertArgs),
    /// Split a labeled corpus into train/dev/test files.
    Split(SplitArgs),
    /// Train n-gram models from a labeled corpus.
    Train(TrainArgs),
    /// Identify the language of each line on stdin.
    Identify(IdentifyArgs),
    /// Evaluate a model on a labeled test set.
    Evaluate(EvaluateArgs),
    /// Search n-gram ranges and penalties on a development set.
    Tune(TuneArgs),
}

#[derive(Args, Debug)]
struct ConvertArgs {
    #[arg(long)]
    signs: PathBuf,
    /// Fail on the first unknown reading (default).
    #[arg(long, conflicts_with = "lenient")]
    strict: bool,
    /// Drop unknown readings and report how many were dropped.
    #[arg(long)]
    lenient: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SplitMode {
    InDomain,
    OutOfDomain,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum)]
    mode: SplitMode,
    /// Output stem; writes <stem>.train.tsv, <stem>.dev.tsv, <stem>.test.tsv.
    #[arg(long)]
    out: PathBuf,
    /// Sample this many lines per label for the dev and test parts.
    #[arg(long)]
    balance: Option<usize>,
    /// Per-label sample size for the test part (defaults to --balance).
    #[arg(long)]
    balance_test: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Remove duplicate lines from the dev and test parts.
    #[arg(long)]
    dedup: bool,
    /// Drop dev and test lines shorter than this many signs.
    #[arg(long)]
    min_len: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_parser = parse_range)]
    range: NGramRange,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    min_count: u64,
}

#[derive(Args, Debug, Clone)]
struct MethodArgs {
    #[arg(long, value_parser = parse_method)]
    method: Method,
    /// Product smoothing value or HeLI penalty multiplier.
    #[arg(long)]
    penalty: Option<f64>,
    /// N-gram range; defaults to the model's range.
    #[arg(long, value_parser = parse_range)]
    range: Option<NGramRange>,
    /// Ensemble only: simple-scoring range.
    #[arg(long, value_parser = parse_range, default_value = "1-10")]
    simple_range: NGramRange,
    /// Ensemble only: sum-of-relative-frequencies range.
    #[arg(long, value_parser = parse_range, default_value = "3-15")]
    sum_range: NGramRange,
    /// Ensemble only: product-of-relative-frequencies range.
    #[arg(long, value_parser = parse_range, default_value = "1-4")]
    product_range: NGramRange,
}

#[derive(Args, Debug)]
struct IdentifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    method: MethodArgs,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TuneArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    dev: PathBuf,
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[arg(long, default_value_t = 15)]
    max_order: usize,
    /// Comma-separated penalty candidates (defaults depend on the method).
    #[arg(long, value_delimiter = ',')]
    penalties: Option<Vec<f64>>,
    #[arg(long)]
    report: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<NGramRange, String> {
    s.parse().map_err(|e: models::ModelError| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|_| format!("expected one of simple, sum, product, heli, ensemble; got {s:?}"))
}

/// A failure that should exit with the usage code.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Runs the CLI against the process's standard streams.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with_io(argv, &mut stdin.lock(), &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with_io<I, T>(argv: I, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Convert(a) => convert(a, stdin, stdout, stderr),
        Command::Split(a) => split(a, stdout),
        Command::Train(a) => train(a, stdout),
        Command::Identify(a) => identify(a, stdin, stdout),
        Command::Evaluate(a) => evaluate(a, stdout),
        Command::Tune(a) => tune(a, stdout),
    };
    let _ = stdout.flush();
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                EXIT_USAGE
            } else {
                EXIT_DATA
            }
        }
    }
}

fn convert(a: ConvertArgs, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let signs = SignList::load(&a.signs)?;
    let mode = if a.lenient { ConversionMode::Lenient } else { ConversionMode::Strict };
    let mut dropped = 0usize;
    for (i, line) in stdin.lines().enumerate() {
        let line = line.with_context(|| format!("reading input line {}", i + 1))?;
        let c = signmap::convert_atf(&line, &signs, mode).with_context(|| format!("input line {}", i + 1))?;
        for (token, pos) in &c.dropped {
            writeln!(stderr, "line {}: dropped unknown reading {token:?} at position {pos}", i + 1)?;
        }
        dropped += c.dropped_count();
        writeln!(stdout, "{}", c.line)?;
    }
    if mode == ConversionMode::Lenient {
        writeln!(stderr, "dropped {dropped} unknown readings")?;
    }
    Ok(())
}

fn split(a: SplitArgs, stdout: &mut dyn Write) -> Result<()> {
    let corpus = corpus::load_labeled(&a.input)?;
    let spec = match a.mode {
        SplitMode::OutOfDomain => corpus::split_out_of_domain(&corpus)?,
        SplitMode::InDomain => corpus::split_in_domain(&corpus)?,
    };
    let (train, dev, test) = spec.apply(&corpus);
    let prepare = |part: LabeledCorpus, per_label: Option<usize>| -> Result<LabeledCorpus> {
        let mut part = if a.dedup { corpus::dedup(&part) } else { part };
        if let Some(n) = a.min_len {
            part = corpus::filter_min_length(&part, n).map_err(|e| usage(e.to_string()))?;
        }
        if let Some(n) = per_label {
            part = corpus::balance_sample(&part, n, a.seed)?;
        }
        Ok(part)
    };
    let dev = prepare(dev, a.balance)?;
    let test = prepare(test, a.balance_test.or(a.balance))?;
    let paths = corpus::split_paths(&a.out);
    for (part, path) in [(&train, &paths[0]), (&dev, &paths[1]), (&test, &paths[2])] {
        part.write_tsv(path)?;
        writeln!(stdout, "{}\t{}", path.display(), part.len())?;
    }
    let meta = json!({
        "mode": match a.mode { SplitMode::InDomain => "in-domain", SplitMode::OutOfDomain => "out-of-domain" },
        "seed": a.seed,
        "sampler": corpus::SAMPLER_ALGORITHM,
        "dedup": a.dedup,
        "min_len": a.min_len,
        "balance_dev": a.balance,
        "balance_test": a.balance_test.or(a.balance),
        "sizes": { "train": train.len(), "dev": dev.len(), "test": test.len() },
    });
    let meta_path = with_suffix(&a.out, ".split.json");
    write_atomic(&meta_path, serde_json::to_string_pretty(&meta)?.as_bytes())
        .with_context(|| format!("writing {}", meta_path.display()))?;
    Ok(())
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn train(a: TrainArgs, stdout: &mut dyn Write) -> Result<()> {
    if a.min_count == 0 {
        return Err(usage("--min-count must be at least 1"));
    }
    let corpus = corpus::load_labeled(&a.input)?;
    let m = models::train_with_min_count(&corpus, a.range, a.min_count)?;
    models::save_models(&m, &a.out)?;
    for model in m.models() {
        writeln!(stdout, "{}\t{}", model.language(), corpus.entries().iter().filter(|e| &e.1 == model.language()).count())?;
    }
    Ok(())
}

fn predictor(args: &MethodArgs, model_range: NGramRange) -> Result<Predictor> {
    let range = args.range.unwrap_or(model_range);
    let mk = |method: Method, range: NGramRange, penalty: Option<f64>| {
        MethodConfig::new(method, range, penalty.unwrap_or(method.default_penalty())).map_err(|e| usage(e.to_string()))
    };
    Ok(match args.method {
        Method::Ensemble => {
            let pick = |r: NGramRange| args.range.unwrap_or(r);
            Predictor::Ensemble(EnsembleConfig {
                simple: mk(Method::Simple, pick(args.simple_range), None)?,
                sum: mk(Method::Sum, pick(args.sum_range), None)?,
                product: mk(Method::Product, pick(args.product_range), args.penalty)?,
            })
        }
        m => Predictor::Single(mk(m, range, args.penalty)?),
    })
}

fn identify(a: IdentifyArgs, stdin: &mut dyn BufRead, stdout: &mut dyn Write) -> Result<()> {
    let models = models::load_models(&a.model)?;
    let p = predictor(&a.method, models.range())?;
    p.validate(&models).map_err(|e| usage(e.to_string()))?;
    let mut lines = Vec::new();
    for (i, line) in stdin.lines().enumerate() {
        lines.push(normalize_text(&line.with_context(|| format!("reading input line {}", i + 1))?));
    }
    for label in p.predict_all(&lines, &models)? {
        writeln!(stdout, "{label}")?;
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs, stdout: &mut dyn Write) -> Result<()> {
    let models = models::load_models(&a.model)?;
    let p = predictor(&a.method, models.range())?;
    p.validate(&models).map_err(|e| usage(e.to_string()))?;
    let data = corpus::load_labeled(&a.test)?;
    let report = eval::evaluate(&models, &data, &p)?;
    writeln!(stdout, "{report}")?;
    if let Some(path) = &a.report {
        write_atomic(path, report.to_json().as_bytes()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn tune(a: TuneArgs, stdout: &mut dyn Write) -> Result<()> {
    if a.max_order == 0 || a.max_order > MAX_ORDER {
        return Err(usage(format!("--max-order must be between 1 and {MAX_ORDER}")));
    }
    if a.method == Method::Ensemble {
        return Err(usage("tune each base method separately; the ensemble reuses their best settings"));
    }
    let train = corpus::load_labeled(&a.train)?;
    let dev = corpus::load_labeled(&a.dev)?;
    let mut grid = GridSpec::full(a.method, a.max_order);
    if let Some(p) = a.penalties {
        if p.is_empty() {
            bail!(usage("--penalties needs at least one value"));
        }
        grid.penalties = p;
    }
    let (best, report) = eval::grid_search(&train, &dev, a.method, &grid).map_err(|e| match e {
        eval::EvalError::Classify(c) => usage(c.to_string()),
        other => other.into(),
    })?;
    writeln!(stdout, "best: {}", describe(&Predictor::Single(best)))?;
    writeln!(stdout, "{report}")?;
    if let Some(path) = &a.report {
        let doc = json!({
            "best": best,
            "grid_cells": grid.cell_count(),
            "model_format_version": MODEL_FORMAT_VERSION,
            "dev_report": report,
        });
        write_atomic(path, serde_json::to_string_pretty(&doc)?.as_bytes())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
