#![allow(dead_code)]

use cuneilid::corpus::{CuneiformLine, Label, LabeledCorpus};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SIGNS: [char; 12] = ['𒀀', '𒁀', '𒀭', '𒂗', '𒆤', '𒆠', '𒈗', '𒂍', '𒈾', '𒉌', '𒊭', '𒋗'];

pub fn lab(s: &str) -> Label {
    Label::new(s).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_line(rng: &mut ChaCha8Rng, alphabet: &[char], min: usize, max: usize) -> CuneiformLine {
    let n = rng.random_range(min..=max);
    CuneiformLine::from_signs((0..n).map(|_| alphabet[rng.random_range(0..alphabet.len())]))
}

/// Languages that prefer different parts of the sign inventory, so that
/// classifiers do better than chance but still make mistakes.
pub fn synthetic_corpus(seed: u64, labels: &[&str], per_label: usize) -> LabeledCorpus {
    let mut r = rng(seed);
    let mut c = LabeledCorpus::new();
    for i in 0..per_label {
        for (k, l) in labels.iter().enumerate() {
            let len = r.random_range(1..=12);
            let signs: Vec<char> = (0..len)
                .map(|_| {
                    if r.random_bool(0.6) {
                        SIGNS[(k * 3 + r.random_range(0..4)) % SIGNS.len()]
                    } else {
                        SIGNS[r.random_range(0..SIGNS.len())]
                    }
                })
                .collect();
            let _ = i;
            c.push(CuneiformLine::from_signs(signs), lab(l));
        }
    }
    c
}

/// Random labeled corpus with arbitrary label interleaving.
pub fn random_corpus(r: &mut ChaCha8Rng, labels: &[&str], max_lines: usize, alphabet: &[char], max_len: usize) -> LabeledCorpus {
    let n = r.random_range(0..=max_lines);
    LabeledCorpus::from_entries((0..n).map(|_| {
        let l = labels[r.random_range(0..labels.len())];
        (random_line(r, alphabet, 0, max_len), lab(l))
    }))
}
