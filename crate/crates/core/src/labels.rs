//! Gold label assignment and label algebra.
//!
//! Labels are BIO tags over characters, words or subwords. Gold character
//! labels come straight from the unit layout; coarser labels are derived from
//! characters (a token is B if any of its characters is B, else I if any is I,
//! else O), and coarse predictions are expanded back to characters as
//! `B I..I`, `I..I` or `O..O`. BIO sequences map one-to-one onto alternating
//! BOS/EOS flag pairs.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Unit;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LabelError {
    #[error("I label at index {0} does not continue a span")]
    DanglingInside(usize),
    #[error("BOS at index {0} inside an open span")]
    NestedBos(usize),
    #[error("EOS at index {0} outside any span")]
    UnopenedEos(usize),
    #[error("span opened at index {0} is never closed")]
    UnclosedSpan(usize),
    #[error("BOS/EOS flag vectors differ in length ({0} vs {1})")]
    RaggedBoundaries(usize, usize),
    #[error("token span ({0},{1}) outside {2} characters")]
    SpanOutOfRange(usize, usize, usize),
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("label file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    B,
    I,
    O,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::B, Label::I, Label::O];

    pub fn as_char(self) -> char {
        match self {
            Label::B => 'B',
            Label::I => 'I',
            Label::O => 'O',
        }
    }

    pub fn from_char(c: char) -> Option<Label> {
        match c {
            'B' => Some(Label::B),
            'I' => Some(Label::I),
            'O' => Some(Label::O),
            _ => None,
        }
    }

    pub fn in_span(self) -> bool {
        self != Label::O
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Char,
    Word,
    Subword,
}

impl Granularity {
    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Char => "char",
            Granularity::Word => "word",
            Granularity::Subword => "subword",
        }
    }

    pub fn parse(s: &str) -> Option<Granularity> {
        match s {
            "char" | "character" => Some(Granularity::Char),
            "word" => Some(Granularity::Word),
            "subword" => Some(Granularity::Subword),
            _ => None,
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSeq {
    pub granularity: Granularity,
    pub labels: Vec<Label>,
}

impl LabelSeq {
    pub fn new(granularity: Granularity, labels: Vec<Label>) -> LabelSeq {
        LabelSeq {
            granularity,
            labels,
        }
    }

    /// Renders `[start, end)` spans; everything else is O.
    pub fn from_spans(granularity: Granularity, n: usize, spans: &[(usize, usize)]) -> LabelSeq {
        let mut labels = vec![Label::O; n];
        for &(s, e) in spans {
            if s < e {
                labels[s] = Label::B;
                for l in &mut labels[s + 1..e] {
                    *l = Label::I;
                }
            }
        }
        LabelSeq::new(granularity, labels)
    }

    pub fn parse(granularity: Granularity, s: &str) -> Result<LabelSeq, LabelError> {
        let labels = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| Label::from_char(c).ok_or_else(|| LabelError::UnknownLabel(c.to_string())))
            .collect::<Result<_, _>>()?;
        Ok(LabelSeq::new(granularity, labels))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Every I must continue a span opened by B.
    pub fn validate(&self) -> Result<(), LabelError> {
        let mut prev = Label::O;
        for (i, &l) in self.labels.iter().enumerate() {
            if l == Label::I && prev == Label::O {
                return Err(LabelError::DanglingInside(i));
            }
            prev = l;
        }
        Ok(())
    }

    /// Maximal `B I*` runs as `[start, end)` pairs.
    pub fn spans(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut open: Option<usize> = None;
        for (i, &l) in self.labels.iter().enumerate() {
            match l {
                Label::B => {
                    if let Some(s) = open.take() {
                        out.push((s, i));
                    }
                    open = Some(i);
                }
                Label::I => {}
                Label::O => {
                    if let Some(s) = open.take() {
                        out.push((s, i));
                    }
                }
            }
        }
        if let Some(s) = open {
            out.push((s, self.labels.len()));
        }
        out
    }
}

impl fmt::Display for LabelSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.labels {
            write!(f, "{}", l.as_char())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BoundarySeq {
    pub bos: Vec<bool>,
    pub eos: Vec<bool>,
}

impl BoundarySeq {
    pub fn new(bos: Vec<bool>, eos: Vec<bool>) -> BoundarySeq {
        BoundarySeq { bos, eos }
    }

    pub fn empty(n: usize) -> BoundarySeq {
        BoundarySeq {
            bos: vec![false; n],
            eos: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.bos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bos.is_empty()
    }

    pub fn bos_indices(&self) -> Vec<usize> {
        self.bos.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
    }

    pub fn eos_indices(&self) -> Vec<usize> {
        self.eos.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
    }

    pub fn from_indices(n: usize, bos: &[usize], eos: &[usize]) -> BoundarySeq {
        let mut b = BoundarySeq::empty(n);
        for &i in bos {
            b.bos[i] = true;
        }
        for &i in eos {
            b.eos[i] = true;
        }
        b
    }

    pub fn validate(&self) -> Result<(), LabelError> {
        boundaries_to_bio(self, Granularity::Word).map(|_| ())
    }
}

/// Character layout of a token sequence: `lengths[i]` characters for token
/// `i`, followed by `separators[i]` separator characters.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CharLayout {
    pub lengths: Vec<usize>,
    pub separators: Vec<usize>,
}

impl CharLayout {
    /// Layout of units concatenated with a single space between units.
    pub fn of_units(units: &[Unit]) -> CharLayout {
        let mut layout = CharLayout::default();
        for (k, u) in units.iter().enumerate() {
            let seps = u.separators();
            for (j, &(s, e)) in u.char_offsets.iter().enumerate() {
                layout.lengths.push(e - s);
                let mut sep = seps[j];
                if j + 1 == u.words.len() && k + 1 < units.len() {
                    sep += 1;
                }
                layout.separators.push(sep);
            }
        }
        layout
    }

    pub fn total_chars(&self) -> usize {
        self.lengths.iter().sum::<usize>() + self.separators.iter().sum::<usize>()
    }

    /// `[start, end)` character span of each token.
    pub fn spans(&self) -> Vec<(usize, usize)> {
        let mut pos = 0;
        self.lengths
            .iter()
            .zip(&self.separators)
            .map(|(&len, &sep)| {
                let span = (pos, pos + len);
                pos += len + sep;
                span
            })
            .collect()
    }
}

/// Gold character labels of units joined by single spaces. Within an SU the
/// first character is B and every later character up to the end of its last
/// word is I; NSU characters and separators between units are O.
pub fn gold_char_labels(units: &[Unit]) -> LabelSeq {
    let mut labels = Vec::new();
    for (k, u) in units.iter().enumerate() {
        let n = u.char_len();
        let start = labels.len();
        labels.resize(start + n, Label::O);
        if u.is_su {
            if let (Some(first), Some(last)) = (u.char_offsets.first(), u.char_offsets.last()) {
                if first.0 < last.1 {
                    labels[start + first.0] = Label::B;
                    for l in &mut labels[start + first.0 + 1..start + last.1] {
                        *l = Label::I;
                    }
                }
            }
        }
        if k + 1 < units.len() {
            labels.push(Label::O);
        }
    }
    LabelSeq::new(Granularity::Char, labels)
}

/// Gold word labels, derived from the character labels.
pub fn gold_word_labels(units: &[Unit]) -> LabelSeq {
    let chars = gold_char_labels(units);
    let spans = CharLayout::of_units(units).spans();
    chars_to_coarse(&chars, &spans, Granularity::Word).expect("unit layout spans lie inside the text")
}

/// Coarse label per token span: B if any covered character is B, else I if
/// any is I, else O.
pub fn chars_to_coarse(
    chars: &LabelSeq,
    spans: &[(usize, usize)],
    target: Granularity,
) -> Result<LabelSeq, LabelError> {
    let n = chars.len();
    let labels = spans
        .iter()
        .map(|&(s, e)| {
            if s > e || e > n {
                return Err(LabelError::SpanOutOfRange(s, e, n));
            }
            let covered = &chars.labels[s..e];
            Ok(if covered.contains(&Label::B) {
                Label::B
            } else if covered.contains(&Label::I) {
                Label::I
            } else {
                Label::O
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(LabelSeq::new(target, labels))
}

/// Expands token labels to characters. Separator characters after token `i`
/// are I only when token `i` is in a span and token `i + 1` continues it.
pub fn coarse_to_chars(
    labels: &LabelSeq,
    lengths: &[usize],
    separators: &[usize],
) -> Result<LabelSeq, LabelError> {
    let n = labels.len();
    for got in [lengths.len(), separators.len()] {
        if got != n {
            return Err(LabelError::LengthMismatch { expected: n, got });
        }
    }
    let mut out = Vec::with_capacity(lengths.iter().sum::<usize>() + separators.iter().sum::<usize>());
    for (i, &l) in labels.labels.iter().enumerate() {
        let len = lengths[i];
        if len > 0 {
            match l {
                Label::B => {
                    out.push(Label::B);
                    out.extend(std::iter::repeat_n(Label::I, len - 1));
                }
                other => out.extend(std::iter::repeat_n(other, len)),
            }
        }
        let joined = l.in_span() && labels.labels.get(i + 1) == Some(&Label::I);
        let sep = if joined { Label::I } else { Label::O };
        out.extend(std::iter::repeat_n(sep, separators[i]));
    }
    Ok(LabelSeq::new(Granularity::Char, out))
}

/// BOS at every B; EOS at the last position of every `B I*` run.
pub fn bio_to_boundaries(labels: &LabelSeq) -> Result<BoundarySeq, LabelError> {
    labels.validate()?;
    let n = labels.len();
    let mut b = BoundarySeq::empty(n);
    for (s, e) in labels.spans() {
        b.bos[s] = true;
        b.eos[e - 1] = true;
    }
    Ok(b)
}

/// Inverse of [`bio_to_boundaries`]; fails unless BOS and EOS alternate.
pub fn boundaries_to_bio(b: &BoundarySeq, granularity: Granularity) -> Result<LabelSeq, LabelError> {
    if b.bos.len() != b.eos.len() {
        return Err(LabelError::RaggedBoundaries(b.bos.len(), b.eos.len()));
    }
    let mut labels = Vec::with_capacity(b.len());
    let mut open: Option<usize> = None;
    for i in 0..b.len() {
        if b.bos[i] {
            if open.is_some() {
                return Err(LabelError::NestedBos(i));
            }
            open = Some(i);
            labels.push(Label::B);
        } else if open.is_some() {
            labels.push(Label::I);
        } else {
            labels.push(Label::O);
        }
        if b.eos[i] {
            if open.is_none() {
                return Err(LabelError::UnopenedEos(i));
            }
            open = None;
        }
    }
    if let Some(s) = open {
        return Err(LabelError::UnclosedSpan(s));
    }
    Ok(LabelSeq::new(granularity, labels))
}

/// Writes a label file: a `#granularity=` header, then one space-separated
/// line per document.
pub fn write_label_file<W: Write>(mut w: W, granularity: Granularity, docs: &[LabelSeq]) -> std::io::Result<()> {
    writeln!(w, "#granularity={granularity}")?;
    for d in docs {
        let line: Vec<String> = d.labels.iter().map(|l| l.to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_label_file<R: BufRead>(reader: R) -> Result<Vec<LabelSeq>, LabelError> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| LabelError::Format("missing header".into()))?
        .map_err(|e| LabelError::Format(e.to_string()))?;
    let gran = header
        .trim()
        .strip_prefix("#granularity=")
        .and_then(Granularity::parse)
        .ok_or_else(|| LabelError::Format(format!("bad header {header:?}")))?;
    let mut docs = Vec::new();
    for line in lines {
        let line = line.map_err(|e| LabelError::Format(e.to_string()))?;
        let labels = line
            .split_whitespace()
            .map(|tok| {
                let mut cs = tok.chars();
                match (cs.next().and_then(Label::from_char), cs.next()) {
                    (Some(l), None) => Ok(l),
                    _ => Err(LabelError::UnknownLabel(tok.to_string())),
                }
            })
            .collect::<Result<_, _>>()?;
        docs.push(LabelSeq::new(gran, labels));
    }
    Ok(docs)
}
