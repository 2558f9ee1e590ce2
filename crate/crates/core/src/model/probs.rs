//! Text format for per-token probabilities.
//!
//! ```text
//! #probs v1 uni=1
//! 0  Hi  0.97  0.01  0.95  0.02
//! 1  .  0.01  0.98  0.02  0.90
//! ```
//!
//! Rows are tab-separated (shown with spaces): `index, token, p_bos, p_eos`
//! plus `p_bos_uni, p_eos_uni` when the header says `uni=1`. Each header starts a new document. Tabs, newlines and
//! backslashes inside tokens are backslash-escaped.

use std::io::{BufRead, Write};

use super::{ModelError, ProbMatrix};

/// One document read from a probability file.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbDocument {
    pub tokens: Vec<String>,
    pub probs: ProbMatrix,
}

pub fn write_probs<W: Write, S: AsRef<str>>(mut w: W, tokens: &[S], m: &ProbMatrix) -> std::io::Result<()> {
    assert_eq!(tokens.len(), m.len(), "one token per probability row");
    writeln!(w, "#probs v1 uni={}", u8::from(m.has_uni()))?;
    for (i, tok) in tokens.iter().enumerate() {
        write!(w, "{i}\t{}\t{}\t{}", escape(tok.as_ref()), m.p_bos[i], m.p_eos[i])?;
        if let (Some(b), Some(e)) = (&m.p_bos_uni, &m.p_eos_uni) {
            write!(w, "\t{}\t{}", b[i], e[i])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reads a file holding exactly one document.
pub fn load_probs<R: BufRead>(reader: R) -> Result<ProbDocument, ModelError> {
    let mut docs = read_prob_documents(reader)?;
    match docs.len() {
        1 => Ok(docs.pop().unwrap()),
        0 => Err(ModelError::Format { line: 1, msg: "missing #probs header".into() }),
        n => Err(ModelError::Format { line: 1, msg: format!("expected one document, found {n}") }),
    }
}

pub fn read_prob_documents<R: BufRead>(reader: R) -> Result<Vec<ProbDocument>, ModelError> {
    struct Partial {
        uni: bool,
        tokens: Vec<String>,
        cols: [Vec<f64>; 4],
    }
    let finish = |p: Partial| -> Result<ProbDocument, ModelError> {
        let [b, e, bu, eu] = p.cols;
        let probs = if p.uni {
            ProbMatrix::with_uni(b, e, bu, eu)?
        } else {
            ProbMatrix::new(b, e)?
        };
        Ok(ProbDocument { tokens: p.tokens, probs })
    };
    const COLUMNS: [&str; 4] = ["p_bos", "p_eos", "p_bos_uni", "p_eos_uni"];

    let mut docs = Vec::new();
    let mut cur: Option<Partial> = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        let line = if line_no == 1 { line.trim_start_matches('\u{feff}') } else { line };
        let fmt = |msg: String| ModelError::Format { line: line_no, msg };
        if let Some(rest) = line.strip_prefix("#probs") {
            let uni = parse_header(rest).ok_or_else(|| fmt(format!("malformed header {line:?}")))?;
            if let Some(p) = cur.take() {
                docs.push(finish(p)?);
            }
            cur = Some(Partial { uni, tokens: Vec::new(), cols: Default::default() });
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let Some(doc) = cur.as_mut() else {
            return Err(fmt("data row before #probs header".into()));
        };
        let fields: Vec<&str> = line.split('\t').collect();
        let want = if doc.uni { 6 } else { 4 };
        if fields.len() != want {
            return Err(fmt(format!("expected {want} columns, found {}", fields.len())));
        }
        let index: usize = fields[0].parse().map_err(|_| fmt(format!("bad index {:?}", fields[0])))?;
        if index != doc.tokens.len() {
            return Err(fmt(format!("index {index} out of sequence, expected {}", doc.tokens.len())));
        }
        doc.tokens.push(unescape(fields[1]).map_err(fmt)?);
        for (k, field) in fields[2..].iter().enumerate() {
            let value: f64 = field
                .parse()
                .map_err(|_| fmt(format!("{} is not a number: {field:?}", COLUMNS[k])))?;
            if !(0.0..=1.0).contains(&value) {
                return Err(ModelError::ProbOutOfRange { line: line_no, column: COLUMNS[k], value });
            }
            doc.cols[k].push(value);
        }
    }
    if let Some(p) = cur.take() {
        docs.push(finish(p)?);
    }
    Ok(docs)
}

fn parse_header(rest: &str) -> Option<bool> {
    let mut parts = rest.split_whitespace();
    if parts.next()? != "v1" {
        return None;
    }
    let uni = match parts.next() {
        None => false,
        Some("uni=0") => false,
        Some("uni=1") => true,
        Some(_) => return None,
    };
    parts.next().is_none().then_some(uni)
}

fn escape(tok: &str) -> String {
    let mut out = String::with_capacity(tok.len());
    for c in tok.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(field: &str) -> Result<String, String> {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => return Err(format!("bad escape \\{}", other.map(String::from).unwrap_or_default())),
        }
    }
    Ok(out)
}
