//! Scoring a line against a [`ModelSet`].
//!
//! Four scorers are available. With `f` ranging over every n-gram token of
//! the line (with multiplicity, all orders in the range) and `rf(g, f)` the
//! relative frequency of `f` in language `g`:
//!
//! | method  | score of language `g`                                  | best   |
//! |---------|--------------------------------------------------------|--------|
//! | simple  | number of `f` present in `g`                           | higher |
//! | sum     | `Σ rf(g, f)`                                           | higher |
//! | product | `Σ -log10 rf(g, f)`, a flat penalty for absent `f`     | lower  |
//! | heli    | mean `-log10 rf` of the longest available n-grams      | lower  |
//!
//! HeLI treats the whole line as a single word. With whole-line features
//! enabled, a line seen verbatim in training is scored by that feature alone.
//! Otherwise each window position of the highest usable order backs off to
//! shorter n-grams until one is found in some language. A feature missing
//! from language `g` costs `-log10(1 / total_g) * multiplier`.
//!
//! Ties are broken by lexicographic label order; scores within a relative
//! [`TIE_TOLERANCE`] of the best count as tied. Scores are accumulated per
//! order in window order, so equal inputs always produce bit-identical scores.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CuneiformLine, Label};
use crate::models::{extract_ngrams, windows, LanguageModel, ModelSet, NGram, NGramRange};

pub const DEFAULT_PRODUCT_PENALTY: f64 = 2.0;
pub const DEFAULT_HELI_PENALTY: f64 = 1.5;

#[derive(Debug, Error, PartialEq)]
pub enum ClassifyError {
    #[error("range {requested} is not covered by the model range {model}")]
    RangeMismatch { requested: NGramRange, model: NGramRange },
    #[error("invalid penalty {penalty} for method {method}")]
    InvalidPenalty { method: Method, penalty: f64 },
    #[error("the ensemble needs separate simple, sum and product configurations")]
    EnsembleConfigRequired,
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
    #[error("model set has no languages")]
    NoModels,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Simple,
    Sum,
    Product,
    Heli,
    Ensemble,
}

impl Method {
    pub fn polarity(self) -> Polarity {
        match self {
            Method::Simple | Method::Sum => Polarity::HigherWins,
            Method::Product | Method::Heli | Method::Ensemble => Polarity::LowerWins,
        }
    }

    pub fn default_penalty(self) -> f64 {
        match self {
            Method::Heli => DEFAULT_HELI_PENALTY,
            _ => DEFAULT_PRODUCT_PENALTY,
        }
    }

    /// Whether the penalty parameter changes this method's scores.
    pub fn uses_penalty(self) -> bool {
        matches!(self, Method::Product | Method::Heli)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Simple => "simple",
            Method::Sum => "sum",
            Method::Product => "product",
            Method::Heli => "heli",
            Method::Ensemble => "ensemble",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = ClassifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "simple" => Method::Simple,
            "sum" => Method::Sum,
            "product" => Method::Product,
            "heli" => Method::Heli,
            "ensemble" => Method::Ensemble,
            _ => return Err(ClassifyError::UnknownMethod(s.to_string())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    HigherWins,
    LowerWins,
}

/// A scorer together with its n-gram range and penalty.
///
/// `penalty` is the flat absent-feature charge for `product` and the penalty
/// multiplier for `heli`; the other methods ignore it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub method: Method,
    pub range: NGramRange,
    pub penalty: f64,
}

impl MethodConfig {
    pub fn new(method: Method, range: NGramRange, penalty: f64) -> Result<Self, ClassifyError> {
        let ok = penalty.is_finite() && penalty > 0.0 && (method != Method::Heli || penalty >= 1.0);
        if !ok {
            return Err(ClassifyError::InvalidPenalty { method, penalty });
        }
        Ok(MethodConfig { method, range, penalty })
    }

    pub fn with_default_penalty(method: Method, range: NGramRange) -> Self {
        MethodConfig { method, range, penalty: method.default_penalty() }
    }
}

/// The three base configurations of the voting ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub simple: MethodConfig,
    pub sum: MethodConfig,
    pub product: MethodConfig,
}

/// Anything that turns a line into a label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Predictor {
    Single(MethodConfig),
    Ensemble(EnsembleConfig),
}

impl Predictor {
    pub fn method(&self) -> Method {
        match self {
            Predictor::Single(c) => c.method,
            Predictor::Ensemble(_) => Method::Ensemble,
        }
    }

    /// Checks that `models` can serve every configuration.
    pub fn validate(&self, models: &ModelSet) -> Result<(), ClassifyError> {
        if models.models().is_empty() {
            return Err(ClassifyError::NoModels);
        }
        match self {
            Predictor::Single(c) => {
                if c.method == Method::Ensemble {
                    return Err(ClassifyError::EnsembleConfigRequired);
                }
                check_range(models, c)
            }
            Predictor::Ensemble(e) => [e.simple, e.sum, e.product].iter().try_for_each(|c| check_range(models, c)),
        }
    }

    pub fn predict(&self, line: &MysteryLine, models: &ModelSet) -> Result<Label, ClassifyError> {
        match self {
            Predictor::Single(c) => identify(line, models, c),
            Predictor::Ensemble(e) => ensemble_vote(line, models, e),
        }
    }

    /// Classifies many lines in parallel; output order follows input order.
    pub fn predict_all(&self, lines: &[CuneiformLine], models: &ModelSet) -> Result<Vec<Label>, ClassifyError> {
        self.validate(models)?;
        lines
            .par_iter()
            .map(|l| self.predict(&MysteryLine::new(l.clone()), models))
            .collect()
    }
}

/// A line to be identified.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MysteryLine {
    line: CuneiformLine,
}

impl MysteryLine {
    pub fn new(line: CuneiformLine) -> Self {
        MysteryLine { line }
    }

    pub fn line(&self) -> &CuneiformLine {
        &self.line
    }

    pub fn signs(&self) -> &[char] {
        self.line.signs()
    }

    pub fn features(&self, order: usize) -> std::collections::HashMap<NGram, u64> {
        extract_ngrams(&self.line, order)
    }

    /// Number of n-gram tokens over all orders of the range.
    pub fn feature_count(&self, range: &NGramRange) -> usize {
        range.orders().map(|n| (self.line.len() + 1).saturating_sub(n)).sum()
    }
}

impl From<CuneiformLine> for MysteryLine {
    fn from(line: CuneiformLine) -> Self {
        MysteryLine::new(line)
    }
}

/// One score per model label, in the model set's (sorted) label order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreVector {
    pub labels: Vec<Label>,
    pub scores: Vec<f64>,
    pub polarity: Polarity,
}

impl ScoreVector {
    fn new(models: &ModelSet, scores: Vec<f64>, polarity: Polarity) -> Self {
        ScoreVector { labels: models.labels().cloned().collect(), scores, polarity }
    }

    pub fn get(&self, label: &Label) -> Option<f64> {
        self.labels.iter().position(|l| l == label).map(|i| self.scores[i])
    }

    /// Best label under the polarity; ties go to the lexicographically
    /// smallest label.
    pub fn best(&self) -> &Label {
        let mut order: Vec<usize> = (0..self.labels.len()).collect();
        order.sort_by(|&a, &b| self.labels[a].cmp(&self.labels[b]));
        let sorted: Vec<f64> = order.iter().map(|&i| self.scores[i]).collect();
        &self.labels[order[argbest(&sorted, self.polarity)]]
    }
}

/// Scores closer than this (relative) are ties: summation order must not
/// decide between mathematically equal scores.
pub const TIE_TOLERANCE: f64 = 1e-12;

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

/// Index of the best score; among scores tied with the best, the lowest index.
pub(crate) fn argbest(scores: &[f64], polarity: Polarity) -> usize {
    let best = scores.iter().copied().reduce(|a, b| match polarity {
        Polarity::HigherWins => a.max(b),
        Polarity::LowerWins => a.min(b),
    });
    match best {
        Some(v) => scores.iter().position(|&s| near(s, v)).expect("non-empty"),
        None => 0,
    }
}

fn check_range(models: &ModelSet, config: &MethodConfig) -> Result<(), ClassifyError> {
    let requested = match config.method {
        Method::Heli => config.range,
        _ => config.range.without_lines(),
    };
    if models.range().covers(&requested) {
        Ok(())
    } else {
        Err(ClassifyError::RangeMismatch { requested, model: models.range() })
    }
}

/// Per language and order: how the line's n-grams of that order fared.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct OrderStats {
    pub hits: u32,
    pub misses: u32,
    pub rel_sum: f64,
    pub neg_log_sum: f64,
}

pub(crate) fn order_stats(line: &[char], model: &LanguageModel, n: usize) -> OrderStats {
    let mut s = OrderStats::default();
    let total = model.total(n) as f64;
    for w in windows(line, n) {
        let c = model.count(w);
        if c == 0 {
            s.misses += 1;
        } else {
            let rf = c as f64 / total;
            s.hits += 1;
            s.rel_sum += rf;
            s.neg_log_sum += -rf.log10();
        }
    }
    s
}

/// Folds per-order statistics (in ascending order) into a score.
pub(crate) fn combine(method: Method, stats: &[OrderStats], penalty: f64) -> f64 {
    match method {
        Method::Simple => stats.iter().map(|s| s.hits as f64).fold(0.0, |a, b| a + b),
        Method::Sum => stats.iter().fold(0.0, |a, s| a + s.rel_sum),
        Method::Product => stats.iter().fold(0.0, |a, s| a + (s.neg_log_sum + penalty * s.misses as f64)),
        Method::Heli | Method::Ensemble => unreachable!("not an order-additive method"),
    }
}

fn score_additive(
    m: &MysteryLine,
    models: &ModelSet,
    config: &MethodConfig,
) -> Result<ScoreVector, ClassifyError> {
    check_range(models, config)?;
    let scores = models
        .models()
        .iter()
        .map(|model| {
            let stats: Vec<OrderStats> =
                config.range.orders().map(|n| order_stats(m.signs(), model, n)).collect();
            combine(config.method, &stats, config.penalty)
        })
        .collect();
    Ok(ScoreVector::new(models, scores, config.method.polarity()))
}

/// Counts the line's n-gram tokens found in each language.
pub fn score_simple(m: &MysteryLine, models: &ModelSet, range: NGramRange) -> Result<ScoreVector, ClassifyError> {
    score_additive(m, models, &MethodConfig::with_default_penalty(Method::Simple, range))
}

/// Sums relative frequencies of the line's n-gram tokens.
pub fn score_sum(m: &MysteryLine, models: &ModelSet, range: NGramRange) -> Result<ScoreVector, ClassifyError> {
    score_additive(m, models, &MethodConfig::with_default_penalty(Method::Sum, range))
}

/// Sums negative log10 relative frequencies; each absent token adds `penalty`.
pub fn score_product(
    m: &MysteryLine,
    models: &ModelSet,
    range: NGramRange,
    penalty: f64,
) -> Result<ScoreVector, ClassifyError> {
    score_additive(m, models, &MethodConfig::new(Method::Product, range, penalty)?)
}

/// HeLI score split into the parts found in the model and the unscaled
/// penalties, so that the multiplier can be applied afterwards.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct HeliParts {
    pub found: f64,
    pub penalty_base: f64,
    pub features: u32,
}

impl HeliParts {
    pub fn score(&self, multiplier: f64) -> f64 {
        if self.features == 0 {
            0.0
        } else {
            (self.found + multiplier * self.penalty_base) / self.features as f64
        }
    }
}

/// `-log10(1 / total)`. A language with no observations of the order is
/// charged against the pooled total of all languages instead.
fn unit_penalty(total: u64, pooled: u64) -> f64 {
    if total > 0 {
        (total as f64).log10()
    } else {
        (pooled.max(1) as f64).log10()
    }
}

pub(crate) fn heli_parts(line: &[char], models: &ModelSet, range: NGramRange) -> Vec<HeliParts> {
    let langs = models.models();
    let mut parts = vec![HeliParts::default(); langs.len()];

    if range.include_whole_line && !line.is_empty() {
        let cl = CuneiformLine::from_signs(line.iter().copied());
        let counts: Vec<u64> = langs.iter().map(|m| m.line_count(&cl)).collect();
        if counts.iter().any(|&c| c > 0) {
            let pooled: u64 = langs.iter().map(|m| m.line_total()).sum();
            for ((p, m), &c) in parts.iter_mut().zip(langs).zip(&counts) {
                if c > 0 {
                    p.found = -(c as f64 / m.line_total() as f64).log10();
                } else {
                    p.penalty_base = unit_penalty(m.line_total(), pooled);
                }
                p.features = 1;
            }
            return parts;
        }
    }

    let high = range.high.min(line.len());
    if high < range.low {
        return parts;
    }
    let pooled = |n: usize| langs.iter().map(|m| m.total(n)).sum::<u64>();
    for pos in 0..=line.len() - high {
        let found = (range.low..=high)
            .rev()
            .map(|k| &line[pos..pos + k])
            .find(|w| langs.iter().any(|m| m.count(w) > 0));
        match found {
            Some(w) => {
                let n = w.len();
                let all = pooled(n);
                for (p, m) in parts.iter_mut().zip(langs) {
                    let c = m.count(w);
                    if c > 0 {
                        p.found += -(c as f64 / m.total(n) as f64).log10();
                    } else {
                        p.penalty_base += unit_penalty(m.total(n), all);
                    }
                    p.features += 1;
                }
            }
            None => {
                let all = pooled(range.low);
                for (p, m) in parts.iter_mut().zip(langs) {
                    p.penalty_base += unit_penalty(m.total(range.low), all);
                    p.features += 1;
                }
            }
        }
    }
    parts
}

/// Mean HeLI score of the line; lower wins.
pub fn score_heli(
    m: &MysteryLine,
    models: &ModelSet,
    range: NGramRange,
    penalty_multiplier: f64,
) -> Result<ScoreVector, ClassifyError> {
    let config = MethodConfig::new(Method::Heli, range, penalty_multiplier)?;
    check_range(models, &config)?;
    let scores = heli_parts(m.signs(), models, range).iter().map(|p| p.score(penalty_multiplier)).collect();
    Ok(ScoreVector::new(models, scores, Polarity::LowerWins))
}

/// Scores with the configured method.
pub fn score(m: &MysteryLine, models: &ModelSet, config: &MethodConfig) -> Result<ScoreVector, ClassifyError> {
    match config.method {
        Method::Simple | Method::Sum | Method::Product => score_additive(m, models, config),
        Method::Heli => score_heli(m, models, config.range, config.penalty),
        Method::Ensemble => Err(ClassifyError::EnsembleConfigRequired),
    }
}

pub fn identify(m: &MysteryLine, models: &ModelSet, config: &MethodConfig) -> Result<Label, ClassifyError> {
    if models.models().is_empty() {
        return Err(ClassifyError::NoModels);
    }
    Ok(score(m, models, config)?.best().clone())
}

/// Majority of two among the three votes; the product vote when all differ.
pub fn majority(simple: Label, sum: Label, product: Label) -> Label {
    if simple == sum {
        simple
    } else {
        product
    }
}

pub fn ensemble_vote(m: &MysteryLine, models: &ModelSet, configs: &EnsembleConfig) -> Result<Label, ClassifyError> {
    let simple = identify(m, models, &configs.simple)?;
    let sum = identify(m, models, &configs.sum)?;
    let product = identify(m, models, &configs.product)?;
    Ok(majority(simple, sum, product))
}
