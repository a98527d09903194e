//! Labeled cuneiform lines and the dataset preparation pipeline.
//!
//! Lines are normalized by dropping whitespace and standalone `x` tokens
//! (completely broken signs). A [`LabeledCorpus`] keeps file order, which the
//! split operations depend on: out-of-domain splits take the first half of
//! each label's lines for training, in-domain splits cut each label's lines
//! into blocks of twenty.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of the generator used by [`balance_sample`]; recorded in
/// split metadata so a sample can be reproduced.
pub const SAMPLER_ALGORITHM: &str = "chacha8/rand_chacha-0.10/fisher-yates-partial";

/// Minimum number of lines a label needs before it can be split three ways.
pub const MIN_SPLIT_LINES: usize = 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("line {0}: missing TAB-separated label")]
    MissingLabel(usize),
    #[error("line {line}: malformed UTF-8 at byte offset {byte_offset}")]
    MalformedUtf8 { line: usize, byte_offset: usize },
    #[error("line {line}: invalid label {label:?}")]
    InvalidLabel { line: usize, label: String },
    #[error("label {0} has fewer than {MIN_SPLIT_LINES} lines")]
    LabelTooSmall(Label),
    #[error("label {label} has {have} lines, {need} needed")]
    InsufficientLines { label: Label, have: usize, need: usize },
    #[error("minimum length must be at least 1")]
    InvalidMinLength,
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

fn io_err(path: &Path, e: std::io::Error) -> CorpusError {
    CorpusError::Io { path: path.to_path_buf(), message: e.to_string() }
}

/// A language or dialect code such as `SUX` or `NEA`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Label(String);

impl Label {
    /// Returns `None` for empty codes and codes containing whitespace.
    pub fn new(code: impl Into<String>) -> Option<Self> {
        let code = code.into();
        if code.is_empty() || code.chars().any(char::is_whitespace) {
            None
        } else {
            Some(Label(code))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Label {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Label::new(value.clone()).ok_or_else(|| format!("invalid label {value:?}"))
    }
}

impl From<Label> for String {
    fn from(l: Label) -> String {
        l.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One input line before normalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawLine {
    pub text: String,
    pub source_index: usize,
}

impl RawLine {
    pub fn new(text: impl Into<String>, source_index: usize) -> Self {
        RawLine { text: text.into(), source_index }
    }
}

/// A whitespace-free sequence of signs, the unit of classification.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CuneiformLine {
    signs: Vec<char>,
}

impl CuneiformLine {
    /// Wraps signs that are already normalized. Whitespace is dropped.
    pub fn from_signs(signs: impl IntoIterator<Item = char>) -> Self {
        CuneiformLine { signs: signs.into_iter().filter(|c| !c.is_whitespace()).collect() }
    }

    pub fn signs(&self) -> &[char] {
        &self.signs
    }

    /// Number of Unicode scalar values.
    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }
}

impl fmt::Display for CuneiformLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.signs.iter().try_for_each(|c| fmt::Write::write_char(f, *c))
    }
}

/// Removes all whitespace and every standalone `x` token.
///
/// An `x` is only elided when whitespace (or the line boundary) delimits it;
/// an `x` inside a longer token is kept.
pub fn normalize_line(raw: &RawLine) -> CuneiformLine {
    normalize_text(&raw.text)
}

pub fn normalize_text(text: &str) -> CuneiformLine {
    CuneiformLine {
        signs: text.split_whitespace().filter(|tok| *tok != "x").flat_map(str::chars).collect(),
    }
}

/// Labeled lines in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabeledCorpus {
    entries: Vec<(CuneiformLine, Label)>,
    label_set: Vec<Label>,
}

impl LabeledCorpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (CuneiformLine, Label)>) -> Self {
        let mut corpus = Self::new();
        for (line, label) in entries {
            corpus.push(line, label);
        }
        corpus
    }

    pub fn push(&mut self, line: CuneiformLine, label: Label) {
        if !self.label_set.contains(&label) {
            self.label_set.push(label.clone());
        }
        self.entries.push((line, label));
    }

    pub fn entries(&self) -> &[(CuneiformLine, Label)] {
        &self.entries
    }

    /// Distinct labels in order of first appearance.
    pub fn label_set(&self) -> &[Label] {
        &self.label_set
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry indices of each label, in label_set order.
    pub fn indices_by_label(&self) -> Vec<(Label, Vec<usize>)> {
        let mut groups: Vec<(Label, Vec<usize>)> =
            self.label_set.iter().map(|l| (l.clone(), Vec::new())).collect();
        for (i, (_, label)) in self.entries.iter().enumerate() {
            let slot = self.label_set.iter().position(|l| l == label).expect("label registered");
            groups[slot].1.push(i);
        }
        groups
    }

    /// Entries at `indices`, in the order given.
    pub fn select(&self, indices: &[usize]) -> LabeledCorpus {
        LabeledCorpus::from_entries(indices.iter().map(|&i| self.entries[i].clone()))
    }

    /// Concatenation of `self` followed by `other`.
    pub fn concat(&self, other: &LabeledCorpus) -> LabeledCorpus {
        LabeledCorpus::from_entries(self.entries.iter().chain(other.entries.iter()).cloned())
    }

    /// Serializes to the `<text>\t<label>\n` record format.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (line, label) in &self.entries {
            out.push_str(&line.to_string());
            out.push('\t');
            out.push_str(label.as_str());
            out.push('\n');
        }
        out
    }

    pub fn write_tsv(&self, path: &Path) -> Result<(), CorpusError> {
        crate::fsutil::write_atomic(path, self.to_tsv().as_bytes()).map_err(|e| io_err(path, e))
    }
}

/// Parses `<text>\t<label>` records. Blank lines are skipped; line numbers
/// in errors are 1-based.
pub fn parse_labeled(bytes: &[u8]) -> Result<LabeledCorpus, CorpusError> {
    let mut corpus = LabeledCorpus::new();
    for (i, raw) in bytes.split(|b| *b == b'\n').enumerate() {
        let line_no = i + 1;
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let text = std::str::from_utf8(raw).map_err(|e| CorpusError::MalformedUtf8 {
            line: line_no,
            byte_offset: e.valid_up_to(),
        })?;
        if text.trim().is_empty() {
            continue;
        }
        let (signs, label) = text.split_once('\t').ok_or(CorpusError::MissingLabel(line_no))?;
        let label = label.trim();
        if label.is_empty() {
            return Err(CorpusError::MissingLabel(line_no));
        }
        let label = Label::new(label)
            .ok_or_else(|| CorpusError::InvalidLabel { line: line_no, label: label.to_string() })?;
        corpus.push(normalize_text(signs), label);
    }
    Ok(corpus)
}

pub fn load_labeled(path: &Path) -> Result<LabeledCorpus, CorpusError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    parse_labeled(&bytes)
}

/// Keeps the first occurrence of each exact (line, label) pair.
pub fn dedup(corpus: &LabeledCorpus) -> LabeledCorpus {
    let mut seen = HashSet::new();
    LabeledCorpus::from_entries(
        corpus.entries.iter().filter(|(line, label)| seen.insert((line, label))).cloned(),
    )
}

/// Keeps lines with at least `min_signs` signs.
pub fn filter_min_length(corpus: &LabeledCorpus, min_signs: usize) -> Result<LabeledCorpus, CorpusError> {
    if min_signs == 0 {
        return Err(CorpusError::InvalidMinLength);
    }
    Ok(LabeledCorpus::from_entries(
        corpus.entries.iter().filter(|(line, _)| line.len() >= min_signs).cloned(),
    ))
}

/// Disjoint train/dev/test index sets over a corpus, each sorted ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    fn finish(mut self) -> Self {
        self.train.sort_unstable();
        self.dev.sort_unstable();
        self.test.sort_unstable();
        self
    }

    /// Materializes the three parts, each in file order.
    pub fn apply(&self, corpus: &LabeledCorpus) -> (LabeledCorpus, LabeledCorpus, LabeledCorpus) {
        (corpus.select(&self.train), corpus.select(&self.dev), corpus.select(&self.test))
    }

    /// Writes `<stem>.train.tsv`, `<stem>.dev.tsv` and `<stem>.test.tsv`.
    pub fn write(&self, corpus: &LabeledCorpus, stem: &Path) -> Result<[PathBuf; 3], CorpusError> {
        let (train, dev, test) = self.apply(corpus);
        let paths = split_paths(stem);
        train.write_tsv(&paths[0])?;
        dev.write_tsv(&paths[1])?;
        test.write_tsv(&paths[2])?;
        Ok(paths)
    }
}

pub fn split_paths(stem: &Path) -> [PathBuf; 3] {
    let with = |suffix: &str| {
        let mut s = stem.as_os_str().to_os_string();
        s.push(suffix);
        PathBuf::from(s)
    };
    [with(".train.tsv"), with(".dev.tsv"), with(".test.tsv")]
}

fn half_up(n: usize) -> usize {
    n.div_ceil(2)
}

/// Sizes of the (train, dev, test) parts for `n` lines split in halves.
fn halving(n: usize) -> (usize, usize, usize) {
    let train = half_up(n);
    let dev = half_up(n - train);
    (train, dev, n - train - dev)
}

fn per_label_split(
    corpus: &LabeledCorpus,
    mut assign: impl FnMut(&[usize], &mut SplitSpec),
) -> Result<SplitSpec, CorpusError> {
    let mut spec = SplitSpec::default();
    for (label, idx) in corpus.indices_by_label() {
        if idx.len() < MIN_SPLIT_LINES {
            return Err(CorpusError::LabelTooSmall(label));
        }
        assign(&idx, &mut spec);
    }
    Ok(spec.finish())
}

/// First half of each label's lines to train; the rest halved into dev and test.
pub fn split_out_of_domain(corpus: &LabeledCorpus) -> Result<SplitSpec, CorpusError> {
    per_label_split(corpus, |idx, spec| {
        let (train, dev, _) = halving(idx.len());
        spec.train.extend_from_slice(&idx[..train]);
        spec.dev.extend_from_slice(&idx[train..train + dev]);
        spec.test.extend_from_slice(&idx[train + dev..]);
    })
}

/// Blocks of 20 lines per label: 10 train, 5 dev, 5 test. A trailing partial
/// block is halved like an out-of-domain split.
pub fn split_in_domain(corpus: &LabeledCorpus) -> Result<SplitSpec, CorpusError> {
    per_label_split(corpus, |idx, spec| {
        for block in idx.chunks(20) {
            let (train, dev) = if block.len() == 20 {
                (10, 5)
            } else {
                let (t, d, _) = halving(block.len());
                (t, d)
            };
            spec.train.extend_from_slice(&block[..train]);
            spec.dev.extend_from_slice(&block[train..train + dev]);
            spec.test.extend_from_slice(&block[train + dev..]);
        }
    })
}

/// Draws exactly `per_label` lines of every label.
///
/// Each label's index list is partially shuffled with Fisher-Yates using one
/// ChaCha8 stream seeded from `seed`, labels visited in first-appearance
/// order. The output is ordered by label, then by original index.
pub fn balance_sample(corpus: &LabeledCorpus, per_label: usize, seed: u64) -> Result<LabeledCorpus, CorpusError> {
    let groups = corpus.indices_by_label();
    for (label, idx) in &groups {
        if idx.len() < per_label {
            return Err(CorpusError::InsufficientLines {
                label: label.clone(),
                have: idx.len(),
                need: per_label,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::with_capacity(per_label * groups.len());
    for (_, mut idx) in groups {
        let n = idx.len();
        for i in 0..per_label {
            let j = rng.random_range(i..n);
            idx.swap(i, j);
        }
        let mut chosen = idx[..per_label].to_vec();
        chosen.sort_unstable();
        picked.extend(chosen);
    }
    Ok(corpus.select(&picked))
}
