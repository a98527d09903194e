//! Sign n-gram extraction and per-language count tables.
//!
//! Counts are exact integers. Relative frequencies are computed on demand as
//! `count / total`, where `total` is the number of n-gram occurrences of the
//! same order in that language's training lines. Lines are not padded.

use std::borrow::Borrow;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CuneiformLine, Label, LabeledCorpus};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Highest n-gram order a range may use.
pub const MAX_ORDER: usize = 15;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("n-gram order {order} outside model range {range}")]
    OrderOutOfRange { order: usize, range: NGramRange },
    #[error("model format version {found} is not supported (expected {MODEL_FORMAT_VERSION})")]
    FormatVersionMismatch { found: u32 },
    #[error("corrupt table for order {order} of language {language}: {reason}")]
    CorruptTable { order: usize, language: String, reason: String },
    #[error("invalid n-gram range: {0}")]
    InvalidRange(String),
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

/// Contiguous orders `low..=high`, optionally with whole-line features.
///
/// Written as `L-H` or `L-H+lines`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NGramRange {
    pub low: usize,
    pub high: usize,
    pub include_whole_line: bool,
}

impl NGramRange {
    pub fn new(low: usize, high: usize, include_whole_line: bool) -> Result<Self, ModelError> {
        if low == 0 || low > high || high > MAX_ORDER {
            return Err(ModelError::InvalidRange(format!(
                "{low}-{high} (need 1 <= low <= high <= {MAX_ORDER})"
            )));
        }
        Ok(NGramRange { low, high, include_whole_line })
    }

    pub fn orders(&self) -> std::ops::RangeInclusive<usize> {
        self.low..=self.high
    }

    pub fn contains_order(&self, n: usize) -> bool {
        self.orders().contains(&n)
    }

    /// True when every feature `other` uses is available in `self`.
    pub fn covers(&self, other: &NGramRange) -> bool {
        self.low <= other.low && other.high <= self.high && (self.include_whole_line || !other.include_whole_line)
    }

    pub fn without_lines(self) -> Self {
        NGramRange { include_whole_line: false, ..self }
    }
}

impl fmt::Display for NGramRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.low, self.high)?;
        if self.include_whole_line {
            f.write_str("+lines")?;
        }
        Ok(())
    }
}

impl FromStr for NGramRange {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::InvalidRange(format!("{s:?} (expected L-H or L-H+lines)"));
        let (body, lines) = match s.strip_suffix("+lines") {
            Some(b) => (b, true),
            None => (s, false),
        };
        let (lo, hi) = match body.split_once('-') {
            Some((lo, hi)) => (lo, hi),
            None => (body, body),
        };
        let lo = lo.trim().parse().map_err(|_| bad())?;
        let hi = hi.trim().parse().map_err(|_| bad())?;
        NGramRange::new(lo, hi, lines)
    }
}

/// A sequence of `order` consecutive signs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NGram(Box<[char]>);

impl NGram {
    pub fn new(signs: &[char]) -> Self {
        NGram(signs.into())
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn signs(&self) -> &[char] {
        &self.0
    }
}

impl Borrow<[char]> for NGram {
    fn borrow(&self) -> &[char] {
        &self.0
    }
}

impl fmt::Display for NGram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|c| fmt::Write::write_char(f, *c))
    }
}

impl From<&str> for NGram {
    fn from(s: &str) -> Self {
        NGram(s.chars().collect())
    }
}

/// Sliding windows of length `n` over the line, in position order.
pub fn windows(line: &[char], n: usize) -> impl Iterator<Item = &[char]> {
    // `slice::windows` panics on 0
    line.windows(n.max(1)).filter(move |_| n > 0)
}

/// The `len - n + 1` windows of the line with multiplicity.
pub fn extract_ngrams(line: &CuneiformLine, n: usize) -> HashMap<NGram, u64> {
    let mut out = HashMap::new();
    for w in windows(line.signs(), n) {
        *out.entry(NGram::new(w)).or_insert(0) += 1;
    }
    out
}

/// Count tables of one language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageModel {
    language: Label,
    low: usize,
    /// `tables[i]` holds order `low + i`.
    tables: Vec<HashMap<NGram, u64>>,
    totals: Vec<u64>,
    lines: Option<HashMap<CuneiformLine, u64>>,
    line_total: u64,
}

impl LanguageModel {
    fn empty(language: Label, range: NGramRange) -> Self {
        let orders = range.high - range.low + 1;
        LanguageModel {
            language,
            low: range.low,
            tables: vec![HashMap::new(); orders],
            totals: vec![0; orders],
            lines: range.include_whole_line.then(HashMap::new),
            line_total: 0,
        }
    }

    fn add_line(&mut self, line: &CuneiformLine) {
        for (i, table) in self.tables.iter_mut().enumerate() {
            let n = self.low + i;
            for w in windows(line.signs(), n) {
                match table.get_mut(w) {
                    Some(c) => *c += 1,
                    None => {
                        table.insert(NGram::new(w), 1);
                    }
                }
                self.totals[i] += 1;
            }
        }
        if let Some(lines) = &mut self.lines {
            if !line.is_empty() {
                *lines.entry(line.clone()).or_insert(0) += 1;
                self.line_total += 1;
            }
        }
    }

    fn prune(&mut self, min_count: u64) {
        if min_count <= 1 {
            return;
        }
        for (table, total) in self.tables.iter_mut().zip(self.totals.iter_mut()) {
            table.retain(|_, c| *c >= min_count);
            *total = table.values().sum();
        }
        if let Some(lines) = &mut self.lines {
            lines.retain(|_, c| *c >= min_count);
            self.line_total = lines.values().sum();
        }
    }

    pub fn language(&self) -> &Label {
        &self.language
    }

    fn slot(&self, order: usize) -> Option<usize> {
        order.checked_sub(self.low).filter(|&i| i < self.tables.len())
    }

    /// Count of a feature of any stored order; 0 when absent or out of range.
    pub fn count(&self, ngram: &[char]) -> u64 {
        self.slot(ngram.len()).and_then(|i| self.tables[i].get(ngram).copied()).unwrap_or(0)
    }

    /// Total n-gram occurrences of the given order; 0 outside the range.
    pub fn total(&self, order: usize) -> u64 {
        self.slot(order).map_or(0, |i| self.totals[i])
    }

    pub fn table(&self, order: usize) -> Option<&HashMap<NGram, u64>> {
        self.slot(order).map(|i| &self.tables[i])
    }

    pub fn line_count(&self, line: &CuneiformLine) -> u64 {
        self.lines.as_ref().and_then(|l| l.get(line).copied()).unwrap_or(0)
    }

    pub fn line_table(&self) -> Option<&HashMap<CuneiformLine, u64>> {
        self.lines.as_ref()
    }

    /// Number of (non-empty) training lines behind the line table.
    pub fn line_total(&self) -> u64 {
        self.line_total
    }

    fn range(&self) -> NGramRange {
        NGramRange {
            low: self.low,
            high: self.low + self.tables.len() - 1,
            include_whole_line: self.lines.is_some(),
        }
    }

    /// `count / total` for the n-gram's own order.
    pub fn relative_frequency(&self, ngram: &[char]) -> Result<f64, ModelError> {
        let order = ngram.len();
        let range = self.range();
        let i = self.slot(order).ok_or(ModelError::OrderOutOfRange { order, range })?;
        let c = self.tables[i].get(ngram).copied().unwrap_or(0);
        Ok(if c == 0 { 0.0 } else { c as f64 / self.totals[i] as f64 })
    }
}

/// One model per label, all sharing a range. Models are kept sorted by label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSet {
    range: NGramRange,
    models: Vec<LanguageModel>,
}

impl ModelSet {
    pub fn range(&self) -> NGramRange {
        self.range
    }

    pub fn models(&self) -> &[LanguageModel] {
        &self.models
    }

    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        self.models.iter().map(|m| &m.language)
    }

    pub fn get(&self, label: &Label) -> Option<&LanguageModel> {
        self.models.iter().find(|m| &m.language == label)
    }

    /// Multiplies every count and total by `factor`.
    pub fn scaled(&self, factor: u64) -> ModelSet {
        let mut out = self.clone();
        for m in &mut out.models {
            for t in &mut m.tables {
                t.values_mut().for_each(|c| *c *= factor);
            }
            m.totals.iter_mut().for_each(|c| *c *= factor);
            if let Some(l) = &mut m.lines {
                l.values_mut().for_each(|c| *c *= factor);
            }
            m.line_total *= factor;
        }
        out
    }
}

pub fn train(corpus: &LabeledCorpus, range: NGramRange) -> Result<ModelSet, ModelError> {
    train_with_min_count(corpus, range, 1)
}

/// Trains with a frequency cutoff: entries with a count below `min_count` are
/// removed and totals recomputed from what remains.
pub fn train_with_min_count(corpus: &LabeledCorpus, range: NGramRange, min_count: u64) -> Result<ModelSet, ModelError> {
    if corpus.is_empty() {
        return Err(ModelError::EmptyCorpus);
    }
    let mut models: Vec<LanguageModel> = corpus
        .indices_by_label()
        .into_par_iter()
        .map(|(label, idx)| {
            let mut m = LanguageModel::empty(label, range);
            for i in idx {
                m.add_line(&corpus.entries()[i].0);
            }
            m.prune(min_count);
            m
        })
        .collect();
    models.sort_by(|a, b| a.language.cmp(&b.language));
    Ok(ModelSet { range, models })
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    range: NGramRange,
    models: BTreeMap<String, LanguageFile>,
}

#[derive(Serialize, Deserialize)]
struct LanguageFile {
    totals: BTreeMap<String, u64>,
    tables: BTreeMap<String, BTreeMap<String, u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lines: Option<BTreeMap<String, u64>>,
}

/// JSON model document with keys in sorted order.
pub fn models_to_json(models: &ModelSet) -> String {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        range: models.range,
        models: models
            .models
            .iter()
            .map(|m| {
                let orders = models.range.orders();
                let totals = orders.clone().map(|n| (n.to_string(), m.total(n))).collect();
                let tables = orders
                    .map(|n| {
                        let t = m.table(n).expect("order in range");
                        (n.to_string(), t.iter().map(|(k, v)| (k.to_string(), *v)).collect())
                    })
                    .collect();
                let lines = m.lines.as_ref().map(|l| l.iter().map(|(k, v)| (k.to_string(), *v)).collect());
                (m.language.to_string(), LanguageFile { totals, tables, lines })
            })
            .collect(),
    };
    serde_json::to_string(&file).expect("model serializes")
}

pub fn models_from_json(text: &str) -> Result<ModelSet, ModelError> {
    #[derive(Deserialize)]
    struct Version {
        format_version: u32,
    }
    let v: Version = serde_json::from_str(text).map_err(|e| ModelError::Malformed(e.to_string()))?;
    if v.format_version != MODEL_FORMAT_VERSION {
        return Err(ModelError::FormatVersionMismatch { found: v.format_version });
    }
    let file: ModelFile = serde_json::from_str(text).map_err(|e| ModelError::Malformed(e.to_string()))?;
    let range = NGramRange::new(file.range.low, file.range.high, file.range.include_whole_line)?;
    let mut models = Vec::with_capacity(file.models.len());
    for (name, lf) in file.models {
        let language = Label::new(name.clone()).ok_or_else(|| ModelError::Malformed(format!("invalid label {name:?}")))?;
        let corrupt = |order: usize, reason: String| ModelError::CorruptTable { order, language: name.clone(), reason };
        let mut m = LanguageModel::empty(language, range);
        let orders_ok = |keys: Vec<&String>| keys.into_iter().all(|k| k.parse::<usize>().is_ok_and(|n| range.contains_order(n)));
        if lf.tables.len() != m.tables.len() || !orders_ok(lf.tables.keys().collect()) {
            return Err(corrupt(0, "table orders do not match range".into()));
        }
        if lf.totals.len() != m.tables.len() || !orders_ok(lf.totals.keys().collect()) {
            return Err(corrupt(0, "total orders do not match range".into()));
        }
        for n in range.orders() {
            let i = n - range.low;
            let table = &lf.tables[&n.to_string()];
            let mut sum = 0u64;
            for (key, &count) in table {
                let g = NGram::from(key.as_str());
                if g.order() != n {
                    return Err(corrupt(n, format!("n-gram {key:?} has wrong length")));
                }
                if count == 0 {
                    return Err(corrupt(n, format!("zero count for {key:?}")));
                }
                sum = sum.checked_add(count).ok_or_else(|| corrupt(n, "count overflow".into()))?;
                m.tables[i].insert(g, count);
            }
            let total = lf.totals[&n.to_string()];
            if total != sum {
                return Err(corrupt(n, format!("total {total} != sum of counts {sum}")));
            }
            m.totals[i] = total;
        }
        match (lf.lines, range.include_whole_line) {
            (Some(lines), true) => {
                let table = m.lines.as_mut().expect("line table enabled");
                for (key, count) in lines {
                    if count == 0 || key.is_empty() {
                        return Err(corrupt(0, format!("bad line entry {key:?}")));
                    }
                    m.line_total += count;
                    table.insert(CuneiformLine::from_signs(key.chars()), count);
                }
            }
            (None, false) => {}
            _ => return Err(corrupt(0, "line table presence does not match range".into())),
        }
        models.push(m);
    }
    Ok(ModelSet { range, models })
}

pub fn save_models(models: &ModelSet, path: &Path) -> Result<(), ModelError> {
    crate::fsutil::write_atomic(path, models_to_json(models).as_bytes())
        .map_err(|e| ModelError::Io { path: path.to_path_buf(), message: e.to_string() })
}

pub fn load_models(path: &Path) -> Result<ModelSet, ModelError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ModelError::Io { path: path.to_path_buf(), message: e.to_string() })?;
    models_from_json(&text)
}
