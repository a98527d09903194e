//! Language and dialect identification for cuneiform text lines.
//!
//! The crate is organised as a pipeline:
//!
//! * [`signmap`] converts ATF transliterations into Unicode cuneiform.
//! * [`corpus`] loads labeled lines, normalizes, deduplicates, filters,
//!   splits and samples them.
//! * [`models`] extracts sign n-grams and trains per-language count tables.
//! * [`classify`] scores lines with simple scoring, sum and product of
//!   relative frequencies, HeLI, and a majority-voting ensemble.
//! * [`eval`] builds confusion matrices, macro F1 and runs grid searches.
//! * [`cli`] is the command-line frontend used by the `cuneilid` binary.

pub mod classify;
pub mod cli;
pub mod corpus;
pub mod eval;
pub mod models;
pub mod signmap;

mod fsutil;

pub use classify::{EnsembleConfig, Method, MethodConfig, MysteryLine, Polarity, Predictor, ScoreVector};
pub use corpus::{CuneiformLine, Label, LabeledCorpus, RawLine, SplitSpec};
pub use eval::{ConfusionMatrix, EvalReport, GridSpec};
pub use models::{LanguageModel, ModelSet, NGram, NGramRange};
pub use signmap::{ConversionMode, SignList, TransliterationLine};
