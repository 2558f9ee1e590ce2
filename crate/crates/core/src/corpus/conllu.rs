use std::io::BufRead;

use super::CorpusError;

/// A surface token as it appears in the text. A multiword token such as
/// "don't" is one surface token even though it spans two syntactic words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfaceToken {
    pub form: String,
    pub space_after: bool,
}

/// Basic dependency of one syntactic word. `head` is 0-based; `None` is root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dependency {
    pub head: Option<usize>,
    pub relation: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConlluSentence {
    pub tokens: Vec<SurfaceToken>,
    /// One entry per syntactic word; multiword ranges and empty nodes excluded.
    pub deprels: Vec<Dependency>,
    pub raw_text: String,
}

impl ConlluSentence {
    fn from_tokens(tokens: Vec<SurfaceToken>, deprels: Vec<Dependency>) -> ConlluSentence {
        let mut raw_text = String::new();
        for (i, t) in tokens.iter().enumerate() {
            raw_text.push_str(&t.form);
            if t.space_after && i + 1 < tokens.len() {
                raw_text.push(' ');
            }
        }
        ConlluSentence {
            tokens,
            deprels,
            raw_text,
        }
    }
}

pub fn parse_conllu_str(input: &str) -> Result<Vec<ConlluSentence>, CorpusError> {
    parse_conllu(input.as_bytes())
}

/// Parses CoNLL-U text into sentences. Comment lines are ignored and
/// `SpaceAfter=No` in MISC suppresses the following space.
pub fn parse_conllu<R: BufRead>(reader: R) -> Result<Vec<ConlluSentence>, CorpusError> {
    let mut out = Vec::new();
    let mut block = Block::default();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let mut line = line?;
        if idx == 0 && line.starts_with('\u{feff}') {
            line.remove(0);
        }
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if let Some(s) = block.finish()? {
                out.push(s);
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        block.push_line(line, lineno)?;
    }
    if let Some(s) = block.finish()? {
        out.push(s);
    }
    Ok(out)
}

#[derive(Default)]
struct Block {
    start_line: usize,
    tokens: Vec<SurfaceToken>,
    deprels: Vec<Dependency>,
    // 1-based head ids as written, validated when the block closes
    raw_heads: Vec<usize>,
    // last word id covered by the most recent multiword range
    range_end: usize,
}

impl Block {
    fn push_line(&mut self, line: &str, lineno: usize) -> Result<(), CorpusError> {
        if self.tokens.is_empty() && self.deprels.is_empty() {
            self.start_line = lineno;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(CorpusError::Parse {
                line: lineno,
                msg: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
        }
        let id = cols[0];
        let form = cols[1];
        let space_after = !cols[9].split('|').any(|f| f == "SpaceAfter=No");
        let parse_err = |msg: String| CorpusError::Parse { line: lineno, msg };

        if id.contains('.') {
            return Ok(());
        }
        if let Some((a, b)) = id.split_once('-') {
            let a: usize = a.parse().map_err(|_| parse_err(format!("bad range id {id:?}")))?;
            let b: usize = b.parse().map_err(|_| parse_err(format!("bad range id {id:?}")))?;
            if a != self.deprels.len() + 1 || b < a {
                return Err(parse_err(format!("range {id} does not start at the next word")));
            }
            self.range_end = b;
            self.tokens.push(SurfaceToken {
                form: form.to_string(),
                space_after,
            });
            return Ok(());
        }

        let word_id: usize = id.parse().map_err(|_| parse_err(format!("bad id {id:?}")))?;
        if word_id != self.deprels.len() + 1 {
            return Err(parse_err(format!(
                "word id {word_id} out of sequence (expected {})",
                self.deprels.len() + 1
            )));
        }
        let head: usize = cols[6]
            .parse()
            .map_err(|_| parse_err(format!("bad head {:?}", cols[6])))?;
        self.raw_heads.push(head);
        self.deprels.push(Dependency {
            head: head.checked_sub(1),
            relation: cols[7].to_string(),
        });
        if word_id > self.range_end {
            self.tokens.push(SurfaceToken {
                form: form.to_string(),
                space_after,
            });
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<Option<ConlluSentence>, CorpusError> {
        let block = std::mem::take(self);
        if block.deprels.is_empty() && block.tokens.is_empty() {
            return Ok(None);
        }
        let structure = |msg: String| CorpusError::Structure {
            line: block.start_line,
            msg,
        };
        if block.range_end > block.deprels.len() {
            return Err(structure(format!(
                "multiword range ends at word {} but sentence has {} words",
                block.range_end,
                block.deprels.len()
            )));
        }
        let n = block.deprels.len();
        for (i, &h) in block.raw_heads.iter().enumerate() {
            if h > n {
                return Err(structure(format!("word {} has dangling head {h}", i + 1)));
            }
        }
        let roots = block.deprels.iter().filter(|d| d.head.is_none()).count();
        if roots != 1 {
            return Err(structure(format!("expected exactly one root, found {roots}")));
        }
        Ok(Some(ConlluSentence::from_tokens(block.tokens, block.deprels)))
    }
}
