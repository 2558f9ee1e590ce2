use std::ops::Add;

use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::labels::{self, Label, LabelSeq};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub b: usize,
    pub i: usize,
    pub o: usize,
}

impl LabelCounts {
    pub fn of(seq: &LabelSeq) -> LabelCounts {
        let mut c = LabelCounts::default();
        for l in &seq.labels {
            match l {
                Label::B => c.b += 1,
                Label::I => c.i += 1,
                Label::O => c.o += 1,
            }
        }
        c
    }
}

impl Add for LabelCounts {
    type Output = LabelCounts;
    fn add(self, rhs: Self) -> Self {
        LabelCounts {
            b: self.b + rhs.b,
            i: self.i + rhs.i,
            o: self.o + rhs.o,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub su_count: usize,
    pub nsu_count: usize,
    pub word: LabelCounts,
    pub char: LabelCounts,
}

impl Add for CorpusStats {
    type Output = CorpusStats;
    fn add(self, rhs: Self) -> Self {
        CorpusStats {
            su_count: self.su_count + rhs.su_count,
            nsu_count: self.nsu_count + rhs.nsu_count,
            word: self.word + rhs.word,
            char: self.char + rhs.char,
        }
    }
}

/// Unit counts and gold B/I/O counts. Each unit is labelled on its own, so
/// no inter-unit separator characters are counted and stats are additive.
pub fn compute_stats(corpus: &Corpus) -> CorpusStats {
    corpus
        .units
        .iter()
        .map(|u| {
            let units = std::slice::from_ref(u);
            let chars = labels::gold_char_labels(units);
            let words = labels::gold_word_labels(units);
            CorpusStats {
                su_count: u.is_su as usize,
                nsu_count: (!u.is_su) as usize,
                word: LabelCounts::of(&words),
                char: LabelCounts::of(&chars),
            }
        })
        .fold(CorpusStats::default(), Add::add)
}
