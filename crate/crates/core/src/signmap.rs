//! ATF transliteration to Unicode cuneiform.
//!
//! A [`SignList`] maps readings such as `an` or `lil₂` to one or more signs.
//! Conversion tokenizes a line into readings, strips annotations, and looks
//! each reading up. The annotation rules are deliberately small:
//!
//! * parenthesized text after a reading is removed (`du₃(KAK)` → `du₃`);
//! * determinative braces are treated as separators (`{d}en` → `d`, `en`);
//! * damage marks (`[ ] ⸢ ⸣ # ? !`) are trimmed from token edges;
//! * a reading of `x` is a broken sign and produces no output.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::CuneiformLine;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SignError {
    #[error("line {line_no}: duplicate reading {reading:?}")]
    DuplicateReading { reading: String, line_no: usize },
    #[error("line {line_no}: reading {reading:?} maps to a non-cuneiform code point")]
    NonCuneiformCodepoint { reading: String, line_no: usize },
    #[error("line {0}: expected `<reading>\\t<signs>`")]
    MalformedRecord(usize),
    #[error("unbalanced parenthesis in {0:?}")]
    UnbalancedParenthesis(String),
    #[error("unknown reading {token:?} at position {position}")]
    UnknownReading { token: String, position: usize },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

/// Whether a code point lies in one of the Sumero-Akkadian cuneiform blocks
/// (Cuneiform, Numbers and Punctuation, Early Dynastic; they are adjacent).
pub fn is_cuneiform(c: char) -> bool {
    matches!(c as u32, 0x12000..=0x1254F)
}

/// Readings are matched case-insensitively; subscript index digits stay part
/// of the key.
fn reading_key(reading: &str) -> String {
    reading.to_lowercase()
}

/// Reading → sign sequence table, in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SignList {
    records: Vec<(String, String)>,
    index: HashMap<String, usize>,
}

impl SignList {
    /// Parses `<reading>\t<signs>` records; `#` lines and blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self, SignError> {
        let mut list = SignList::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let (reading, signs) = raw.split_once('\t').ok_or(SignError::MalformedRecord(line_no))?;
            let (reading, signs) = (reading.trim(), signs.trim());
            if reading.is_empty() || signs.is_empty() {
                return Err(SignError::MalformedRecord(line_no));
            }
            list.insert(reading, signs, line_no)?;
        }
        Ok(list)
    }

    pub fn load(path: &Path) -> Result<Self, SignError> {
        let text = fs::read_to_string(path)
            .map_err(|e| SignError::Io { path: path.to_path_buf(), message: e.to_string() })?;
        Self::parse(&text)
    }

    fn insert(&mut self, reading: &str, signs: &str, line_no: usize) -> Result<(), SignError> {
        if !signs.chars().all(is_cuneiform) {
            return Err(SignError::NonCuneiformCodepoint { reading: reading.to_string(), line_no });
        }
        let key = reading_key(reading);
        if self.index.contains_key(&key) {
            return Err(SignError::DuplicateReading { reading: reading.to_string(), line_no });
        }
        self.index.insert(key, self.records.len());
        self.records.push((reading.to_string(), signs.to_string()));
        Ok(())
    }

    pub fn lookup(&self, reading: &str) -> Option<&str> {
        self.index.get(&reading_key(reading)).map(|&i| self.records[i].1.as_str())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Canonical serialization: one record per line, in load order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (reading, signs) in &self.records {
            let _ = writeln!(out, "{reading}\t{signs}");
        }
        out
    }
}

/// Removes every parenthesized span, innermost first, and trims the result.
pub fn strip_annotations(token: &str) -> Result<String, SignError> {
    let mut s = token.to_string();
    while let Some(open) = s.rfind('(') {
        let close = s[open..]
            .find(')')
            .map(|off| open + off)
            .ok_or_else(|| SignError::UnbalancedParenthesis(token.to_string()))?;
        s.replace_range(open..=close, "");
    }
    if s.contains(')') {
        return Err(SignError::UnbalancedParenthesis(token.to_string()));
    }
    Ok(s.trim().to_string())
}

const DAMAGE_MARKS: &[char] = &['[', ']', '⸢', '⸣', '#', '?', '!'];

/// Sign readings of one transliterated line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransliterationLine {
    tokens: Vec<String>,
}

impl TransliterationLine {
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

impl<S: Into<String>> FromIterator<S> for TransliterationLine {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TransliterationLine {
            tokens: iter.into_iter().map(Into::into).filter(|t: &String| !t.is_empty()).collect(),
        }
    }
}

/// Splits a line into words on whitespace, strips parenthesized annotations
/// from each word, then splits on `-`, `.`, `{` and `}`.
pub fn tokenize_atf(line: &str) -> Result<TransliterationLine, SignError> {
    let mut tokens = Vec::new();
    for word in line.split_whitespace() {
        let word = strip_annotations(word)?;
        for piece in word.split(['-', '.', '{', '}']) {
            let piece = piece.trim_matches(DAMAGE_MARKS);
            if !piece.is_empty() {
                tokens.push(piece.to_string());
            }
        }
    }
    Ok(TransliterationLine { tokens })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConversionMode {
    /// Fail on the first unknown reading.
    #[default]
    Strict,
    /// Drop unknown readings and count them.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conversion {
    pub line: CuneiformLine,
    /// Unknown readings dropped in lenient mode, with token positions.
    pub dropped: Vec<(String, usize)>,
}

impl Conversion {
    pub fn dropped_count(&self) -> usize {
        self.dropped.len()
    }
}

fn is_broken(token: &str) -> bool {
    token.eq_ignore_ascii_case("x")
}

pub fn to_cuneiform(
    line: &TransliterationLine,
    signs: &SignList,
    mode: ConversionMode,
) -> Result<Conversion, SignError> {
    let mut out = String::new();
    let mut dropped = Vec::new();
    for (position, token) in line.tokens.iter().enumerate() {
        if is_broken(token) {
            continue;
        }
        match (signs.lookup(token), mode) {
            (Some(s), _) => out.push_str(s),
            (None, ConversionMode::Strict) => {
                return Err(SignError::UnknownReading { token: token.clone(), position })
            }
            (None, ConversionMode::Lenient) => dropped.push((token.clone(), position)),
        }
    }
    Ok(Conversion { line: CuneiformLine::from_signs(out.chars()), dropped })
}

/// Tokenizes and converts one ATF line.
pub fn convert_atf(line: &str, signs: &SignList, mode: ConversionMode) -> Result<Conversion, SignError> {
    to_cuneiform(&tokenize_atf(line)?, signs, mode)
}
