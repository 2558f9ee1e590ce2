//! Treebank-to-benchmark conversion.
//!
//! A UD treebank already carries sentence boundaries; each UD sentence becomes
//! one [`Unit`], and the unit is an SU when its gold dependency tree contains a
//! clausal predicate with a core argument or non-core dependent (see
//! [`RelationRuleSet`]). Everything else (timestamps, file names, bare noun
//! phrases) becomes an NSU.

mod conllu;
mod rules;
mod stats;

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use conllu::{parse_conllu, parse_conllu_str, ConlluSentence, Dependency, SurfaceToken};
pub use rules::{classify_unit, RelationRuleSet};
pub use stats::{compute_stats, CorpusStats, LabelCounts};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("sentence at line {line}: {msg}")]
    Structure { line: usize, msg: String },
    #[error("invalid unit: {0}")]
    InvalidUnit(String),
    #[error("corpus line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("relation rules: {0}")]
    Rules(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One unit of the benchmark: a UD sentence with its SU/NSU indicator.
///
/// `char_offsets` are `(start, end)` character (not byte) offsets of each word
/// in `text`; everything between two words is separator whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unit {
    pub text: String,
    pub words: Vec<String>,
    pub char_offsets: Vec<(usize, usize)>,
    pub is_su: bool,
}

impl Unit {
    /// Builds a unit from surface tokens and their space-after flags. No space
    /// is emitted after the final token.
    pub fn from_tokens<S: AsRef<str>>(tokens: &[(S, bool)], is_su: bool) -> Unit {
        let words: Vec<String> = tokens.iter().map(|(w, _)| w.as_ref().to_string()).collect();
        let gaps: Vec<String> = tokens
            .iter()
            .enumerate()
            .map(|(i, (_, space))| {
                if *space && i + 1 < tokens.len() {
                    " ".to_string()
                } else {
                    String::new()
                }
            })
            .collect();
        Unit::from_words_and_gaps(words, &gaps, is_su)
    }

    /// Words separated by a single space.
    pub fn from_words<S: AsRef<str>>(words: &[S], is_su: bool) -> Unit {
        let tokens: Vec<(&str, bool)> = words.iter().map(|w| (w.as_ref(), true)).collect();
        Unit::from_tokens(&tokens, is_su)
    }

    /// `gaps[i]` is the separator text following word `i`.
    pub fn from_words_and_gaps<S: AsRef<str>>(words: Vec<String>, gaps: &[S], is_su: bool) -> Unit {
        assert_eq!(words.len(), gaps.len(), "one gap per word");
        let mut text = String::new();
        let mut char_offsets = Vec::with_capacity(words.len());
        let mut pos = 0;
        for (w, gap) in words.iter().zip(gaps) {
            let len = w.chars().count();
            char_offsets.push((pos, pos + len));
            text.push_str(w);
            text.push_str(gap.as_ref());
            pos += len + gap.as_ref().chars().count();
        }
        Unit {
            text,
            words,
            char_offsets,
            is_su,
        }
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Separator text after each word (the last entry is any trailing text).
    pub fn gaps(&self) -> Vec<String> {
        let chars: Vec<char> = self.text.chars().collect();
        let mut out = Vec::with_capacity(self.words.len());
        for (i, &(_, end)) in self.char_offsets.iter().enumerate() {
            let next = self
                .char_offsets
                .get(i + 1)
                .map(|o| o.0)
                .unwrap_or(chars.len());
            out.push(chars[end..next].iter().collect());
        }
        out
    }

    /// Character count of the separator after each word.
    pub fn separators(&self) -> Vec<usize> {
        let n = self.char_len();
        self.char_offsets
            .iter()
            .enumerate()
            .map(|(i, &(_, end))| {
                let next = self.char_offsets.get(i + 1).map(|o| o.0).unwrap_or(n);
                next - end
            })
            .collect()
    }

    /// Checks that the words tile the text, separated only by whitespace.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |msg: String| Err(CorpusError::InvalidUnit(msg));
        if self.words.is_empty() {
            return bad("unit has no words".into());
        }
        if self.words.len() != self.char_offsets.len() {
            return bad(format!(
                "{} words but {} offsets",
                self.words.len(),
                self.char_offsets.len()
            ));
        }
        let chars: Vec<char> = self.text.chars().collect();
        let mut cursor = 0;
        for (w, &(start, end)) in self.words.iter().zip(&self.char_offsets) {
            if start < cursor || end < start || end > chars.len() {
                return bad(format!("offsets ({start},{end}) out of order or range"));
            }
            if !chars[cursor..start].iter().all(|c| c.is_whitespace()) {
                return bad(format!("non-space text before word {w:?}"));
            }
            let covered: String = chars[start..end].iter().collect();
            if &covered != w {
                return bad(format!("offsets ({start},{end}) cover {covered:?}, not {w:?}"));
            }
            cursor = end;
        }
        if !chars[cursor..].iter().all(|c| c.is_whitespace()) {
            return bad("non-space text after the last word".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Dev,
    Test,
}

impl Split {
    /// Guesses the split from a UD-style file name such as `en_ewt-ud-dev.conllu`.
    pub fn from_path(path: &Path) -> Option<Split> {
        let name = path.file_name()?.to_string_lossy().to_lowercase();
        if name.contains("train") {
            Some(Split::Train)
        } else if name.contains("dev") || name.contains("valid") {
            Some(Split::Dev)
        } else if name.contains("test") {
            Some(Split::Test)
        } else {
            None
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    pub units: Vec<Unit>,
    pub split: Split,
}

impl Corpus {
    pub fn new(units: Vec<Unit>, split: Split) -> Corpus {
        Corpus { units, split }
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// Unit boundary indices `b_0 = 0, ..., b_M = N` over the concatenated words.
    pub fn boundaries(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.units.len() + 1);
        let mut acc = 0;
        out.push(0);
        for u in &self.units {
            acc += u.len();
            out.push(acc);
        }
        out
    }
}

/// One unit per UD sentence, in order.
pub fn convert_treebank(sents: &[ConlluSentence], rules: &RelationRuleSet, split: Split) -> Corpus {
    let units = sents
        .iter()
        .map(|s| {
            let tokens: Vec<(&str, bool)> = s
                .tokens
                .iter()
                .map(|t| (t.form.as_str(), t.space_after))
                .collect();
            Unit::from_tokens(&tokens, classify_unit(s, rules))
        })
        .collect();
    Corpus { units, split }
}

/// Loads units from a CoNLL-U file, a directory of `.conllu` files (read in
/// name order) or a JSONL corpus file. The split is guessed from the name.
pub fn load_corpus(path: &Path, rules: &RelationRuleSet) -> Result<Corpus, CorpusError> {
    let split = Split::from_path(path).unwrap_or_default();
    let open = |p: &Path| -> Result<std::io::BufReader<std::fs::File>, CorpusError> {
        let f = std::fs::File::open(p)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", p.display())))?;
        Ok(std::io::BufReader::new(f))
    };
    let is_conllu = |p: &Path| p.extension().is_some_and(|e| e == "conllu");
    if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        files.retain(|p| is_conllu(p));
        files.sort();
        let mut units = Vec::new();
        for f in files {
            let sents = parse_conllu(open(&f)?)?;
            units.extend(convert_treebank(&sents, rules, split).units);
        }
        Ok(Corpus::new(units, split))
    } else if is_conllu(path) {
        Ok(convert_treebank(&parse_conllu(open(path)?)?, rules, split))
    } else {
        Ok(Corpus::new(read_corpus_jsonl(open(path)?)?, split))
    }
}

/// Reads the one-JSON-object-per-line corpus format, validating every unit.
pub fn read_corpus_jsonl<R: BufRead>(reader: R) -> Result<Vec<Unit>, CorpusError> {
    let mut units = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let unit: Unit =
            serde_json::from_str(&line).map_err(|source| CorpusError::Json { line: i + 1, source })?;
        unit.validate()
            .map_err(|e| CorpusError::InvalidUnit(format!("line {}: {e}", i + 1)))?;
        units.push(unit);
    }
    Ok(units)
}

pub fn write_corpus_jsonl<W: Write>(mut w: W, units: &[Unit]) -> std::io::Result<()> {
    for u in units {
        serde_json::to_writer(&mut w, u)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
