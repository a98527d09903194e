//! Confusion matrices, macro F1, and development-set tuning.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::classify::{
    argbest, combine, heli_parts, order_stats, ClassifyError, HeliParts, Method, MethodConfig, OrderStats, Polarity, Predictor,
};
use crate::corpus::{Label, LabeledCorpus};
use crate::models::{train, ModelError, ModelSet, NGramRange, MAX_ORDER, MODEL_FORMAT_VERSION};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("gold and predicted label sequences differ in length ({gold} vs {pred})")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("predicted label {0} is not among the gold labels")]
    UnknownPredictedLabel(Label),
    #[error("gold label {0} is not known to the model")]
    UnknownGoldLabel(Label),
    #[error("evaluation set is empty")]
    EmptyEvaluationSet,
    #[error("grid is empty")]
    EmptyGrid,
    #[error("grid search is not defined for the {0} method")]
    UnsupportedMethod(Method),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Counts of (actual, predicted) label pairs. Rows are actual labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    labels: Vec<Label>,
    cells: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    /// Builds a matrix from explicit cells; `cells` must be square over `labels`.
    pub fn from_cells(labels: Vec<Label>, cells: Vec<Vec<u64>>) -> Option<Self> {
        let k = labels.len();
        (cells.len() == k && cells.iter().all(|r| r.len() == k)).then_some(ConfusionMatrix { labels, cells })
    }

    /// Tallies pairs over a fixed label universe.
    pub fn tally(labels: Vec<Label>, gold: &[Label], pred: &[Label]) -> Result<Self, EvalError> {
        if gold.len() != pred.len() {
            return Err(EvalError::LengthMismatch { gold: gold.len(), pred: pred.len() });
        }
        let k = labels.len();
        let mut cells = vec![vec![0u64; k]; k];
        let pos = |l: &Label| labels.iter().position(|x| x == l);
        for (g, p) in gold.iter().zip(pred) {
            let a = pos(g).ok_or_else(|| EvalError::UnknownGoldLabel(g.clone()))?;
            let b = pos(p).ok_or_else(|| EvalError::UnknownPredictedLabel(p.clone()))?;
            cells[a][b] += 1;
        }
        Ok(ConfusionMatrix { labels, cells })
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn cells(&self) -> &[Vec<u64>] {
        &self.cells
    }

    pub fn cell(&self, actual: &Label, predicted: &Label) -> Option<u64> {
        let a = self.labels.iter().position(|l| l == actual)?;
        let p = self.labels.iter().position(|l| l == predicted)?;
        Some(self.cells[a][p])
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.cells[i].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        self.cells.iter().map(|r| r[j]).sum()
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    pub fn per_class(&self) -> Vec<ClassMetrics> {
        (0..self.labels.len())
            .map(|i| {
                let tp = self.cells[i][i] as f64;
                let ratio = |d: u64| if d == 0 { 0.0 } else { tp / d as f64 };
                let precision = ratio(self.col_sum(i));
                let recall = ratio(self.row_sum(i));
                let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
                ClassMetrics { label: self.labels[i].clone(), precision, recall, f1, support: self.row_sum(i) }
            })
            .collect()
    }
}

/// Labels are the sorted distinct gold labels; predictions must be among them.
pub fn confusion(gold: &[Label], pred: &[Label]) -> Result<ConfusionMatrix, EvalError> {
    let labels: Vec<Label> = gold.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    ConfusionMatrix::tally(labels, gold, pred)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub label: Label,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Unweighted mean of per-class F1; 0 for an empty matrix.
pub fn macro_f1(matrix: &ConfusionMatrix) -> f64 {
    let pc = matrix.per_class();
    if pc.is_empty() {
        return 0.0;
    }
    pc.iter().map(|c| c.f1).sum::<f64>() / pc.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMeta {
    pub report_format_version: u32,
    pub model_format_version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub lines: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub config: Predictor,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub matrix: ConfusionMatrix,
    pub meta: ReportMeta,
}

impl EvalReport {
    fn from_matrix(matrix: ConfusionMatrix, config: Predictor) -> Self {
        EvalReport {
            config,
            macro_f1: macro_f1(&matrix),
            per_class: matrix.per_class(),
            meta: ReportMeta {
                report_format_version: REPORT_FORMAT_VERSION,
                model_format_version: MODEL_FORMAT_VERSION,
                seed: None,
                lines: matrix.total() as usize,
            },
            matrix,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels = self.matrix.labels();
        let w = labels.iter().map(|l| l.as_str().chars().count()).max().unwrap_or(0).max(6);
        let cw = self.matrix.cells().iter().flatten().map(|c| c.to_string().len()).max().unwrap_or(1).max(w);
        writeln!(f, "config: {}", describe(&self.config))?;
        let mut head = format!("{:<w$}", "actual");
        for l in labels {
            let _ = write!(head, " {:>cw$}", l.as_str());
        }
        writeln!(f, "{head}")?;
        for (l, row) in labels.iter().zip(self.matrix.cells()) {
            write!(f, "{:<w$}", l.as_str())?;
            for c in row {
                write!(f, " {c:>cw$}")?;
            }
            writeln!(f)?;
        }
        writeln!(f)?;
        writeln!(f, "{:<w$} {:>9} {:>9} {:>9} {:>7}", "label", "precision", "recall", "f1", "support")?;
        for c in &self.per_class {
            writeln!(f, "{:<w$} {:>9.4} {:>9.4} {:>9.4} {:>7}", c.label.as_str(), c.precision, c.recall, c.f1, c.support)?;
        }
        write!(f, "macro F1: {:.4}", self.macro_f1)
    }
}

/// One-line description of a predictor, e.g. `product 1-4 penalty=2`.
pub fn describe(p: &Predictor) -> String {
    let one = |c: &MethodConfig| {
        if c.method.uses_penalty() {
            format!("{} {} penalty={}", c.method, c.range, c.penalty)
        } else {
            format!("{} {}", c.method, c.range)
        }
    };
    match p {
        Predictor::Single(c) => one(c),
        Predictor::Ensemble(e) => format!("ensemble [{}; {}; {}]", one(&e.simple), one(&e.sum), one(&e.product)),
    }
}

fn check_gold(models: &ModelSet, data: &LabeledCorpus) -> Result<(), EvalError> {
    if data.is_empty() {
        return Err(EvalError::EmptyEvaluationSet);
    }
    for l in data.label_set() {
        if models.get(l).is_none() {
            return Err(EvalError::UnknownGoldLabel(l.clone()));
        }
    }
    Ok(())
}

/// Matrix over the sorted union of gold and predicted labels.
fn report_for(gold: &[Label], pred: &[Label], config: Predictor) -> Result<EvalReport, EvalError> {
    let labels: Vec<Label> = gold.iter().chain(pred).cloned().collect::<BTreeSet<_>>().into_iter().collect();
    Ok(EvalReport::from_matrix(ConfusionMatrix::tally(labels, gold, pred)?, config))
}

/// Classifies every line of `data` and scores the predictions.
pub fn evaluate(models: &ModelSet, data: &LabeledCorpus, config: &Predictor) -> Result<EvalReport, EvalError> {
    check_gold(models, data)?;
    let lines: Vec<_> = data.entries().iter().map(|(l, _)| l.clone()).collect();
    let gold: Vec<Label> = data.entries().iter().map(|(_, l)| l.clone()).collect();
    let pred = config.predict_all(&lines, models)?;
    report_for(&gold, &pred, *config)
}

/// Candidate configurations for [`grid_search`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub orders: Vec<(usize, usize)>,
    pub whole_line: Vec<bool>,
    pub penalties: Vec<f64>,
}

impl GridSpec {
    /// Every range `low..=high` with `1 <= low <= high <= max_order`, both
    /// whole-line settings for HeLI, and the method's default penalty grid.
    pub fn full(method: Method, max_order: usize) -> Self {
        let orders = (1..=max_order).flat_map(|h| (1..=h).map(move |l| (l, h))).collect();
        GridSpec {
            orders,
            whole_line: if method == Method::Heli { vec![false, true] } else { vec![false] },
            penalties: default_penalties(method),
        }
    }

    pub fn single(range: NGramRange, penalty: f64) -> Self {
        GridSpec { orders: vec![(range.low, range.high)], whole_line: vec![range.include_whole_line], penalties: vec![penalty] }
    }

    pub fn cell_count(&self) -> usize {
        self.orders.len() * self.whole_line.len() * self.penalties.len()
    }
}

/// 0.5, 1.0, ..., 7.0 for product; 1.0, 1.1, ..., 2.0 for HeLI.
pub fn default_penalties(method: Method) -> Vec<f64> {
    match method {
        Method::Product => (1..=14).map(|i| i as f64 * 0.5).collect(),
        Method::Heli => (10..=20).map(|i| i as f64 / 10.0).collect(),
        m => vec![m.default_penalty()],
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    range: NGramRange,
    penalty: f64,
}

impl Cell {
    /// Smaller is preferred among equal scores.
    fn preference_key(&self) -> (usize, usize, f64, bool) {
        (self.range.high, self.range.low, self.penalty, self.range.include_whole_line)
    }
}

fn prefer(a: &(Cell, f64), b: &(Cell, f64)) -> bool {
    if a.1 != b.1 {
        return a.1 > b.1;
    }
    a.0.preference_key().partial_cmp(&b.0.preference_key()) == Some(std::cmp::Ordering::Less)
}

fn cell_f1(labels: &[Label], gold: &[usize], pred: &[usize]) -> f64 {
    let used: BTreeSet<usize> = gold.iter().chain(pred).copied().collect();
    let used: Vec<usize> = used.into_iter().collect();
    let k = used.len();
    let mut cells = vec![vec![0u64; k]; k];
    let slot = |i: usize| used.binary_search(&i).expect("present");
    for (&g, &p) in gold.iter().zip(pred) {
        cells[slot(g)][slot(p)] += 1;
    }
    let names = used.iter().map(|&i| labels[i].clone()).collect();
    macro_f1(&ConfusionMatrix { labels: names, cells })
}

/// Evaluates every grid cell on `dev` and returns the configuration with the
/// highest macro F1, with its full development report.
///
/// Counts are collected once for the widest range; each cell then combines
/// per-order statistics, which gives the same scores as a model trained on
/// that cell's range alone. Ties prefer a smaller high order, then a smaller
/// low order, then a smaller penalty.
pub fn grid_search(
    train_set: &LabeledCorpus,
    dev: &LabeledCorpus,
    method: Method,
    grid: &GridSpec,
) -> Result<(MethodConfig, EvalReport), EvalError> {
    if method == Method::Ensemble {
        return Err(EvalError::UnsupportedMethod(method));
    }
    if grid.cell_count() == 0 {
        return Err(EvalError::EmptyGrid);
    }
    let whole_line: Vec<bool> = if method == Method::Heli {
        grid.whole_line.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    } else {
        vec![false]
    };
    let penalties: Vec<f64> = if method.uses_penalty() { grid.penalties.clone() } else { vec![method.default_penalty()] };
    let mut cells = Vec::new();
    for &(lo, hi) in &grid.orders {
        for &wl in &whole_line {
            let range = NGramRange::new(lo, hi, wl)?;
            for &p in &penalties {
                MethodConfig::new(method, range, p)?;
                cells.push(Cell { range, penalty: p });
            }
        }
    }

    let wide = NGramRange::new(
        grid.orders.iter().map(|o| o.0).min().expect("non-empty"),
        grid.orders.iter().map(|o| o.1).max().expect("non-empty"),
        whole_line.contains(&true),
    )?;
    let models = train(train_set, wide)?;
    check_gold(&models, dev)?;
    let labels: Vec<Label> = models.labels().cloned().collect();
    let gold: Vec<usize> = dev
        .entries()
        .iter()
        .map(|(_, l)| labels.binary_search(l).expect("checked"))
        .collect();
    let lines: Vec<&[char]> = dev.entries().iter().map(|(l, _)| l.signs()).collect();

    let scored: Vec<(Cell, f64)> = match method {
        Method::Heli => {
            let mut ranges: Vec<NGramRange> = cells.iter().map(|c| c.range).collect();
            ranges.dedup();
            let mut out = Vec::with_capacity(cells.len());
            for range in ranges {
                let parts: Vec<Vec<HeliParts>> = lines.par_iter().map(|l| heli_parts(l, &models, range)).collect();
                let here: Vec<Cell> = cells.iter().filter(|c| c.range == range).copied().collect();
                out.extend(here.into_par_iter().map(|cell| {
                    let pred: Vec<usize> = parts
                        .iter()
                        .map(|ps| {
                            let s: Vec<f64> = ps.iter().map(|p| p.score(cell.penalty)).collect();
                            argbest(&s, Polarity::LowerWins)
                        })
                        .collect();
                    (cell, cell_f1(&labels, &gold, &pred))
                }).collect::<Vec<_>>());
            }
            out
        }
        _ => {
            // stats[line][lang][order - wide.low]
            let stats: Vec<Vec<Vec<OrderStats>>> = lines
                .par_iter()
                .map(|l| {
                    models
                        .models()
                        .iter()
                        .map(|m| wide.orders().map(|n| order_stats(l, m, n)).collect())
                        .collect()
                })
                .collect();
            cells
                .par_iter()
                .map(|cell| {
                    let (a, b) = (cell.range.low - wide.low, cell.range.high - wide.low);
                    let pred: Vec<usize> = stats
                        .iter()
                        .map(|per_lang| {
                            let s: Vec<f64> =
                                per_lang.iter().map(|st| combine(method, &st[a..=b], cell.penalty)).collect();
                            argbest(&s, method.polarity())
                        })
                        .collect();
                    (*cell, cell_f1(&labels, &gold, &pred))
                })
                .collect()
        }
    };

    let best = scored
        .iter()
        .skip(1)
        .fold(scored[0], |acc, c| if prefer(c, &acc) { *c } else { acc });
    let config = MethodConfig::new(method, best.0.range, best.0.penalty)?;
    let report = evaluate(&models, dev, &Predictor::Single(config))?;
    debug_assert_eq!(report.macro_f1, best.1);
    Ok((config, report))
}

/// Retrains on training plus development data for the final test run.
pub fn finalize(train_set: &LabeledCorpus, dev: &LabeledCorpus, range: NGramRange) -> Result<ModelSet, EvalError> {
    Ok(train(&train_set.concat(dev), range)?)
}

/// Smallest range covering every configuration of a predictor.
pub fn covering_range(p: &Predictor) -> NGramRange {
    let ranges: Vec<NGramRange> = match p {
        Predictor::Single(c) => vec![c.range],
        Predictor::Ensemble(e) => vec![e.simple.range, e.sum.range, e.product.range],
    };
    NGramRange {
        low: ranges.iter().map(|r| r.low).min().expect("non-empty"),
        high: ranges.iter().map(|r| r.high).max().expect("non-empty").min(MAX_ORDER),
        include_whole_line: p.method() == Method::Heli && ranges.iter().any(|r| r.include_whole_line),
    }
}
