//! Training and evaluation inputs built from consecutive units.
//!
//! Each input concatenates `L` consecutive units with `L ~ Geometric(p_cc)`
//! (unbounded when `p_cc = 0`), capped at `max_tokens`. Before concatenation
//! every unit is, with probability `p_da`, re-cased or stripped of its final
//! sentence-ending punctuation; after concatenation the first and last units
//! are each truncated with probability `p_tr`, and a truncated unit becomes
//! an NSU.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Unit;
use crate::labels::{self, BoundarySeq, CharLayout, LabelSeq};

#[derive(Debug, Error, PartialEq)]
pub enum AugmentError {
    #[error("{name} must be a probability in [0,1], got {value}")]
    Probability { name: &'static str, value: f64 },
    #[error("max_tokens must be positive")]
    ZeroMaxTokens,
    #[error("end punctuation {0:?} is not in the punctuation set")]
    EndPunctNotSubset(char),
    #[error("transform weights must be non-negative with a positive sum")]
    Weights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub p_cc: f64,
    pub p_da: f64,
    pub p_tr: f64,
    pub max_tokens: usize,
    /// Punctuation set `P`.
    pub punct: String,
    /// Sentence-ending punctuation `P_e`, a subset of `punct`.
    pub end_punct: String,
    /// Relative weights of lower, upper, title and strip-punctuation.
    pub transform_weights: [f64; 4],
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            p_cc: 0.5,
            p_da: 0.3,
            p_tr: 0.1,
            max_tokens: 512,
            punct: ".?!\")'".to_string(),
            end_punct: ".?!".to_string(),
            transform_weights: [1.0; 4],
            seed: 0,
        }
    }
}

impl AugmentConfig {
    /// Plain concatenation, no augmentation or truncation.
    pub fn concat_only(p_cc: f64, max_tokens: usize, seed: u64) -> Self {
        AugmentConfig {
            p_cc,
            p_da: 0.0,
            p_tr: 0.0,
            max_tokens,
            seed,
            ..AugmentConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        for (name, value) in [("p_cc", self.p_cc), ("p_da", self.p_da), ("p_tr", self.p_tr)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(AugmentError::Probability { name, value });
            }
        }
        if self.max_tokens == 0 {
            return Err(AugmentError::ZeroMaxTokens);
        }
        if let Some(c) = self.end_punct.chars().find(|c| !self.punct.contains(*c)) {
            return Err(AugmentError::EndPunctNotSubset(c));
        }
        let w = &self.transform_weights;
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
            return Err(AugmentError::Weights);
        }
        Ok(())
    }

    fn is_punct(&self, c: char) -> bool {
        self.punct.contains(c)
    }

    fn is_end_punct(&self, c: char) -> bool {
        self.end_punct.contains(c)
    }
}

/// Number of units to concatenate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConcatLength {
    Units(usize),
    /// Concatenate up to the token cap.
    Unbounded,
}

/// Draws `L` with `p(L = l) = (1 - p_cc)^(l-1) p_cc` for `l >= 1`.
pub fn sample_length<R: Rng + ?Sized>(cfg: &AugmentConfig, rng: &mut R) -> ConcatLength {
    if cfg.p_cc <= 0.0 {
        return ConcatLength::Unbounded;
    }
    let failures = Geometric::new(cfg.p_cc.min(1.0))
        .expect("p_cc validated to (0,1]")
        .sample(rng);
    ConcatLength::Units(usize::try_from(failures).unwrap_or(usize::MAX - 1) + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Lower,
    Upper,
    Title,
    StripPunct,
}

impl Transform {
    pub const ALL: [Transform; 4] = [
        Transform::Lower,
        Transform::Upper,
        Transform::Title,
        Transform::StripPunct,
    ];
}

/// What happened to one source unit on its way into an example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub unit: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<Transform>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub truncated_head: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub truncated_tail: bool,
}

impl Provenance {
    fn of(unit: usize) -> Provenance {
        Provenance {
            unit,
            transform: None,
            truncated_head: false,
            truncated_tail: false,
        }
    }
}

/// A model input: consecutive (possibly transformed) units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExample {
    pub units: Vec<Unit>,
    /// Parallel to `units`.
    pub provenance: Vec<Provenance>,
}

impl TrainingExample {
    pub fn len(&self) -> usize {
        self.units.iter().map(Unit::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn words(&self) -> Vec<String> {
        self.units.iter().flat_map(|u| u.words.iter().cloned()).collect()
    }

    /// BOS at the first and EOS at the last token of every SU.
    pub fn gold(&self) -> BoundarySeq {
        let mut b = BoundarySeq::empty(self.len());
        let mut pos = 0;
        for u in &self.units {
            if u.is_su && !u.is_empty() {
                b.bos[pos] = true;
                b.eos[pos + u.len() - 1] = true;
            }
            pos += u.len();
        }
        b
    }

    pub fn layout(&self) -> CharLayout {
        CharLayout::of_units(&self.units)
    }

    pub fn gold_labels(&self, granularity: labels::Granularity) -> LabelSeq {
        match granularity {
            labels::Granularity::Char => labels::gold_char_labels(&self.units),
            _ => labels::gold_word_labels(&self.units),
        }
    }

    pub fn to_record(&self) -> ExampleRecord {
        let gold = self.gold();
        ExampleRecord {
            words: self.words(),
            bos: gold.bos_indices(),
            eos: gold.eos_indices(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn to_document(&self) -> DocumentRecord {
        DocumentRecord {
            units: self.units.clone(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Serialized example: words and gold BOS/EOS indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub words: Vec<String>,
    pub bos: Vec<usize>,
    pub eos: Vec<usize>,
    #[serde(default)]
    pub provenance: Vec<Provenance>,
}

/// Serialized example that keeps full unit layout (needed for char-level scoring).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub units: Vec<Unit>,
    #[serde(default)]
    pub provenance: Vec<Provenance>,
}

impl DocumentRecord {
    pub fn into_example(self) -> TrainingExample {
        let provenance = if self.provenance.len() == self.units.len() {
            self.provenance
        } else {
            (0..self.units.len()).map(Provenance::of).collect()
        };
        TrainingExample {
            units: self.units,
            provenance,
        }
    }
}

/// Joins units from `start`, reducing the count to the largest that fits
/// `max_tokens`. A lone oversize unit is cut to `max_tokens` words and,
/// having lost its tail, becomes an NSU.
pub fn concat_units(units: &[Unit], start: usize, len: ConcatLength, cfg: &AugmentConfig) -> TrainingExample {
    assert!(start < units.len(), "start index {start} out of range");
    let wanted = match len {
        ConcatLength::Units(l) => l.max(1),
        ConcatLength::Unbounded => usize::MAX,
    };
    let mut ex = TrainingExample {
        units: Vec::new(),
        provenance: Vec::new(),
    };
    let mut tokens = 0;
    for (k, u) in units[start..].iter().enumerate().take(wanted) {
        if tokens + u.len() > cfg.max_tokens {
            break;
        }
        tokens += u.len();
        ex.units.push(u.clone());
        ex.provenance.push(Provenance::of(start + k));
    }
    if ex.units.is_empty() {
        ex.units.push(units[start].clone());
        ex.provenance.push(Provenance::of(start));
        truncate_tail(&mut ex, cfg.max_tokens - 1);
    }
    ex
}

/// With probability `p_da`, applies one transform drawn by `transform_weights`.
pub fn augment_unit<R: Rng + ?Sized>(unit: &Unit, cfg: &AugmentConfig, rng: &mut R) -> (Unit, Option<Transform>) {
    if cfg.p_da <= 0.0 || rng.random::<f64>() >= cfg.p_da {
        return (unit.clone(), None);
    }
    let total: f64 = cfg.transform_weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    let mut chosen = Transform::StripPunct;
    for (t, w) in Transform::ALL.iter().zip(cfg.transform_weights) {
        if x < w {
            chosen = *t;
            break;
        }
        x -= w;
    }
    (apply_transform(unit, chosen, cfg), Some(chosen))
}

pub fn apply_transform(unit: &Unit, t: Transform, cfg: &AugmentConfig) -> Unit {
    let recase = |f: fn(&str) -> String| {
        let words = unit.words.iter().map(|w| f(w)).collect();
        Unit::from_words_and_gaps(words, &unit.gaps(), unit.is_su)
    };
    match t {
        Transform::Lower => recase(|w| w.to_lowercase()),
        Transform::Upper => recase(|w| w.to_uppercase()),
        Transform::Title => recase(title_case),
        Transform::StripPunct => strip_end_punct(unit, cfg).unwrap_or_else(|| unit.clone()),
    }
}

fn title_case(w: &str) -> String {
    let mut cs = w.chars();
    match cs.next() {
        Some(first) => first.to_uppercase().chain(cs.flat_map(char::to_lowercase)).collect(),
        None => String::new(),
    }
}

/// Removes trailing sentence-ending punctuation when the unit matches
/// `.* P_e P*`: the trailing run of `P` characters (read across word
/// boundaries) must contain a `P_e`, and everything from its first `P_e` on is
/// dropped. Words left empty are removed. Returns `None` when the pattern does
/// not match or nothing but punctuation would remain.
pub fn strip_end_punct(unit: &Unit, cfg: &AugmentConfig) -> Option<Unit> {
    // (word, char) positions of the trailing P-run, collected back to front
    let mut run: Vec<(usize, usize)> = Vec::new();
    'outer: for (wi, w) in unit.words.iter().enumerate().rev() {
        let chars: Vec<char> = w.chars().collect();
        for ci in (0..chars.len()).rev() {
            if !cfg.is_punct(chars[ci]) {
                break 'outer;
            }
            run.push((wi, ci));
        }
    }
    let &(cut_word, cut_char) = run.iter().rev().find(|&&(wi, ci)| {
        unit.words[wi]
            .chars()
            .nth(ci)
            .is_some_and(|c| cfg.is_end_punct(c))
    })?;
    let gaps = unit.gaps();
    let trailing = gaps.last().cloned().unwrap_or_default();
    let mut words: Vec<String> = unit.words[..cut_word].to_vec();
    let mut new_gaps: Vec<String> = gaps[..cut_word].to_vec();
    let head: String = unit.words[cut_word].chars().take(cut_char).collect();
    if !head.is_empty() {
        words.push(head);
        new_gaps.push(String::new());
    }
    if words.is_empty() {
        return None;
    }
    *new_gaps.last_mut().unwrap() = trailing;
    Some(Unit::from_words_and_gaps(words, &new_gaps, unit.is_su))
}

/// Drops the words of the first unit before `keep_from`. Removing at least
/// one word turns the unit into an NSU.
pub fn truncate_head(ex: &mut TrainingExample, keep_from: usize) {
    let Some(first) = ex.units.first_mut() else { return };
    if keep_from == 0 || keep_from >= first.len() {
        return;
    }
    let gaps = first.gaps();
    *first = Unit::from_words_and_gaps(first.words[keep_from..].to_vec(), &gaps[keep_from..], false);
    ex.provenance[0].truncated_head = true;
}

/// Drops the words of the last unit after `keep_until` (inclusive bound).
pub fn truncate_tail(ex: &mut TrainingExample, keep_until: usize) {
    let Some(last) = ex.units.last_mut() else { return };
    if keep_until + 1 >= last.len() {
        return;
    }
    let mut gaps = last.gaps()[..=keep_until].to_vec();
    *gaps.last_mut().unwrap() = String::new();
    *last = Unit::from_words_and_gaps(last.words[..=keep_until].to_vec(), &gaps, false);
    let k = ex.provenance.len() - 1;
    ex.provenance[k].truncated_tail = true;
}

/// With independent probability `p_tr` each, truncates the first unit at a
/// uniform word (dropping what precedes it) and the last unit at a uniform
/// word (dropping what follows it).
pub fn truncate_edges<R: Rng + ?Sized>(mut ex: TrainingExample, cfg: &AugmentConfig, rng: &mut R) -> TrainingExample {
    if ex.units.is_empty() {
        return ex;
    }
    if rng.random::<f64>() < cfg.p_tr {
        let k = rng.random_range(0..ex.units[0].len());
        truncate_head(&mut ex, k);
    }
    if rng.random::<f64>() < cfg.p_tr {
        let k = rng.random_range(0..ex.units.last().unwrap().len());
        truncate_tail(&mut ex, k);
    }
    ex
}

/// One pass over a corpus, regenerated per `(seed, epoch)`.
pub struct ExampleStream<'a> {
    units: &'a [Unit],
    cfg: &'a AugmentConfig,
    rng: ChaCha8Rng,
    cursor: usize,
}

impl<'a> ExampleStream<'a> {
    pub fn new(units: &'a [Unit], cfg: &'a AugmentConfig, epoch: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch);
        ExampleStream {
            units,
            cfg,
            rng,
            cursor: 0,
        }
    }
}

impl Iterator for ExampleStream<'_> {
    type Item = TrainingExample;

    fn next(&mut self) -> Option<TrainingExample> {
        if self.cursor >= self.units.len() {
            return None;
        }
        let wanted = match sample_length(self.cfg, &mut self.rng) {
            ConcatLength::Units(l) => l,
            ConcatLength::Unbounded => usize::MAX,
        };
        // Augment lazily so the cap is checked against augmented lengths.
        let mut staged: Vec<Unit> = Vec::new();
        let mut transforms = Vec::new();
        let mut tokens = 0;
        for u in self.units[self.cursor..].iter().take(wanted) {
            let (aug, t) = augment_unit(u, self.cfg, &mut self.rng);
            tokens += aug.len();
            staged.push(aug);
            transforms.push(t);
            if tokens > self.cfg.max_tokens {
                break;
            }
        }
        let mut ex = concat_units(&staged, 0, ConcatLength::Units(staged.len()), self.cfg);
        for p in &mut ex.provenance {
            p.transform = transforms[p.unit];
            p.unit += self.cursor;
        }
        self.cursor += ex.units.len();
        Some(truncate_edges(ex, self.cfg, &mut self.rng))
    }
}

/// Evaluation documents: plain concatenation with the given `p_cc`.
pub fn build_documents(units: &[Unit], p_cc: f64, max_tokens: usize, seed: u64) -> Vec<TrainingExample> {
    let cfg = AugmentConfig::concat_only(p_cc, max_tokens, seed);
    ExampleStream::new(units, &cfg, 0).collect()
}

pub fn write_examples_jsonl<W: Write>(mut w: W, examples: &[TrainingExample]) -> std::io::Result<()> {
    for ex in examples {
        serde_json::to_writer(&mut w, &ex.to_record())?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_documents_jsonl<W: Write>(mut w: W, examples: &[TrainingExample]) -> std::io::Result<()> {
    for ex in examples {
        serde_json::to_writer(&mut w, &ex.to_document())?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn su(text: &str) -> Unit {
        let words: Vec<&str> = text.split(' ').collect();
        Unit::from_words(&words, true)
    }

    fn glued(tokens: &[&str], is_su: bool) -> Unit {
        // last token attached to the previous one, as UD punctuation usually is
        let n = tokens.len();
        let toks: Vec<(&str, bool)> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (*t, i + 2 != n))
            .collect();
        Unit::from_tokens(&toks, is_su)
    }

    #[test]
    fn geometric_edge_cases() {
        let mut r = rng(1);
        let cfg = AugmentConfig { p_cc: 1.0, ..Default::default() };
        for _ in 0..1000 {
            assert_eq!(sample_length(&cfg, &mut r), ConcatLength::Units(1));
        }
        let cfg = AugmentConfig { p_cc: 0.0, ..Default::default() };
        assert_eq!(sample_length(&cfg, &mut r), ConcatLength::Unbounded);
    }

    #[test]
    fn geometric_mean_is_inverse_p() {
        let mut r = rng(7);
        let cfg = AugmentConfig { p_cc: 0.5, ..Default::default() };
        let draws = 100_000;
        let total: usize = (0..draws)
            .map(|_| match sample_length(&cfg, &mut r) {
                ConcatLength::Units(l) => l,
                ConcatLength::Unbounded => unreachable!(),
            })
            .sum();
        let mean = total as f64 / draws as f64;
        assert!((mean - 2.0).abs() / 2.0 < 0.02, "mean {mean}");
    }

    #[test]
    fn concat_two_sus() {
        let units = [glued(&["Hi", "."], true), glued(&["Go", "!"], true)];
        let ex = concat_units(&units, 0, ConcatLength::Units(2), &AugmentConfig::default());
        let g = ex.gold();
        assert_eq!(ex.words(), vec!["Hi", ".", "Go", "!"]);
        assert_eq!((g.bos_indices(), g.eos_indices()), (vec![0, 2], vec![1, 3]));
    }

    #[test]
    fn concat_su_then_nsu() {
        let units = [glued(&["Hi", "."], true), Unit::from_words(&["***", "**"], false)];
        let g = concat_units(&units, 0, ConcatLength::Units(2), &AugmentConfig::default()).gold();
        assert_eq!((g.bos_indices(), g.eos_indices()), (vec![0], vec![1]));
    }

    #[test]
    fn concat_respects_token_cap() {
        let units = vec![su("a b c"); 5];
        let cfg = AugmentConfig { max_tokens: 10, ..Default::default() };
        let ex = concat_units(&units, 0, ConcatLength::Units(5), &cfg);
        assert_eq!(ex.units.len(), 3);
        assert_eq!(ex.len(), 9);
        let ex = concat_units(&units, 1, ConcatLength::Unbounded, &cfg);
        assert_eq!(ex.units.len(), 3);
        assert_eq!(ex.provenance.iter().map(|p| p.unit).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn oversize_unit_is_cut_and_relabelled() {
        let units = [su("a b c d e f")];
        let cfg = AugmentConfig { max_tokens: 4, ..Default::default() };
        let ex = concat_units(&units, 0, ConcatLength::Units(1), &cfg);
        assert_eq!(ex.words(), vec!["a", "b", "c", "d"]);
        assert!(!ex.units[0].is_su);
        assert!(ex.provenance[0].truncated_tail);
        assert!(ex.gold().bos_indices().is_empty());
    }

    #[test]
    fn strip_punct_table4() {
        let cfg = AugmentConfig::default();
        let u = glued(&["Joe", "went", "to", "school", "."], true);
        assert_eq!(u.text, "Joe went to school.");
        let out = apply_transform(&u, Transform::StripPunct, &cfg);
        assert_eq!(out.text, "Joe went to school");
        assert_eq!(out.words, vec!["Joe", "went", "to", "school"]);
        assert!(out.is_su);
        out.validate().unwrap();
    }

    #[test]
    fn strip_punct_regex_cases() {
        let cfg = AugmentConfig::default();
        let u = Unit::from_words(&["Really?!)"], true);
        assert_eq!(strip_end_punct(&u, &cfg).unwrap().text, "Really");
        let u = Unit::from_tokens(&[("Really", false), ("?", false), ("!", false), (")", true)], true);
        assert_eq!(strip_end_punct(&u, &cfg).unwrap().text, "Really");
        let u = Unit::from_words(&["Hello", "world"], true);
        assert_eq!(strip_end_punct(&u, &cfg), None);
        assert_eq!(apply_transform(&u, Transform::StripPunct, &cfg), u);
        // closing quote only, no P_e in the trailing run
        assert_eq!(strip_end_punct(&Unit::from_words(&["Hi\")"], true), &cfg), None);
        // P_e followed by a non-P character does not count
        assert_eq!(strip_end_punct(&Unit::from_words(&["e.g", "x"], true), &cfg), None);
        // nothing but punctuation: left alone
        assert_eq!(strip_end_punct(&Unit::from_words(&["...", "!"], false), &cfg), None);
        let u = Unit::from_words(&["(Hello).", "'"], true);
        assert_eq!(strip_end_punct(&u, &cfg).unwrap().text, "(Hello)");
    }

    #[test]
    fn casing_transforms() {
        let cfg = AugmentConfig::default();
        let u = Unit::from_words(&["After", "that", "he", "..."], true);
        assert_eq!(apply_transform(&u, Transform::Upper, &cfg).text, "AFTER THAT HE ...");
        assert_eq!(apply_transform(&u, Transform::Lower, &cfg).text, "after that he ...");
        let u = Unit::from_words(&["hello", "wORLD"], false);
        let t = apply_transform(&u, Transform::Title, &cfg);
        assert_eq!(t.text, "Hello World");
        assert!(!t.is_su);
        // ß upper-cases to two characters; offsets follow
        let u = Unit::from_words(&["straße", "x"], true);
        let up = apply_transform(&u, Transform::Upper, &cfg);
        assert_eq!(up.text, "STRASSE X");
        up.validate().unwrap();
    }

    #[test]
    fn truncation_table4() {
        let cfg = AugmentConfig::default();
        let joe = apply_transform(&glued(&["Joe", "went", "to", "school", "."], true), Transform::StripPunct, &cfg);
        let after = apply_transform(&Unit::from_words(&["After", "that", "he", "left"], true), Transform::Upper, &cfg);
        let mut ex = concat_units(&[joe, after], 0, ConcatLength::Units(2), &cfg);
        assert_eq!(ex.gold().bos_indices(), vec![0, 4]);
        truncate_head(&mut ex, 2);
        assert_eq!(ex.units[0].text, "to school");
        assert!(!ex.units[0].is_su);
        let g = ex.gold();
        assert_eq!(ex.words(), vec!["to", "school", "AFTER", "THAT", "HE", "LEFT"]);
        assert_eq!((g.bos_indices(), g.eos_indices()), (vec![2], vec![5]));
    }

    #[test]
    fn zero_removal_truncation_keeps_su() {
        let mut ex = concat_units(&[su("a b c")], 0, ConcatLength::Units(1), &AugmentConfig::default());
        truncate_head(&mut ex, 0);
        truncate_tail(&mut ex, 2);
        assert!(ex.units[0].is_su);
        assert!(!ex.provenance[0].truncated_head && !ex.provenance[0].truncated_tail);
    }

    #[test]
    fn single_unit_truncated_both_sides() {
        let mut ex = concat_units(&[su("a b c d")], 0, ConcatLength::Units(1), &AugmentConfig::default());
        truncate_head(&mut ex, 1);
        truncate_tail(&mut ex, 1);
        assert_eq!(ex.words(), vec!["b", "c"]);
        assert_eq!(ex.gold(), BoundarySeq::empty(2));
    }

    #[test]
    fn stream_is_deterministic_and_covers_corpus() {
        let units: Vec<Unit> = (0..50).map(|i| su(&format!("w{i} x y ."))).collect();
        let cfg = AugmentConfig { seed: 3, ..Default::default() };
        let a: Vec<_> = ExampleStream::new(&units, &cfg, 0).collect();
        let b: Vec<_> = ExampleStream::new(&units, &cfg, 0).collect();
        let c: Vec<_> = ExampleStream::new(&units, &cfg, 1).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let ids: Vec<usize> = a.iter().flat_map(|e| e.provenance.iter().map(|p| p.unit)).collect();
        assert_eq!(ids, (0..50).collect::<Vec<_>>());
        for ex in &a {
            ex.gold().validate().unwrap();
            assert!(ex.len() <= cfg.max_tokens);
        }
    }

    #[test]
    fn config_validation() {
        assert!(AugmentConfig::default().validate().is_ok());
        let bad = AugmentConfig { p_da: 1.5, ..Default::default() };
        assert!(matches!(bad.validate(), Err(AugmentError::Probability { name: "p_da", .. })));
        let bad = AugmentConfig { end_punct: ";".into(), ..Default::default() };
        assert_eq!(bad.validate(), Err(AugmentError::EndPunctNotSubset(';')));
        let bad = AugmentConfig { max_tokens: 0, ..Default::default() };
        assert_eq!(bad.validate(), Err(AugmentError::ZeroMaxTokens));
    }

    #[test]
    fn record_formats() {
        let ex = concat_units(&[glued(&["Hi", "."], true)], 0, ConcatLength::Units(1), &AugmentConfig::default());
        let json = serde_json::to_string(&ex.to_record()).unwrap();
        assert_eq!(json, r#"{"words":["Hi","."],"bos":[0],"eos":[1],"provenance":[{"unit":0}]}"#);
        let doc: DocumentRecord = serde_json::from_str(&serde_json::to_string(&ex.to_document()).unwrap()).unwrap();
        assert_eq!(doc.into_example(), ex);
    }
}
