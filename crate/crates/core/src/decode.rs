//! Turning per-token probabilities into SU spans.
//!
//! Two families of decoders:
//!
//! * EOS-only segmentation cuts after every token whose EOS probability
//!   reaches 0.5 and labels each segment as one SU. Optionally the final token
//!   is forced to close a segment; otherwise a trailing segment stays outside
//!   every span.
//! * The BOS&EOS decoder finds the most probable BIO labeling of the whole
//!   sequence. A labeling scores
//!   `Π p_bos(b) · p_eos(e) · Π(1 - p_bos) · Π(1 - p_eos)` over span starts
//!   `b`, span ends `e` and every other token, so NSU tokens pay for *not*
//!   being a boundary. A two-state (inside/outside) dynamic program computes
//!   the optimum in linear time.
//!
//! Tokens whose probability is below the candidate threshold `c` skip the
//! corresponding step entirely: they can be neither a span start (BOS) nor a
//! span end (EOS), and they contribute no factor. This makes decoding with
//! threshold `c` equal to decoding, without a threshold, a matrix where
//! every entry below `c` is set to zero.

use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Execution};
use crate::labels::{Granularity, Label, LabelError, LabelSeq};
use crate::model::ProbMatrix;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("candidate threshold must be in [0,1], got {0}")]
    Threshold(f64),
    #[error("probability floor must be in (0, 0.5), got {0}")]
    Floor(f64),
    #[error("unknown method {0:?} (expected eos, eos-force or bosEos)")]
    UnknownMethod(String),
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Labels(#[from] LabelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoderConfig {
    /// Minimum probability for a token to be considered as a BOS/EOS
    /// candidate by the BOS&EOS decoder.
    pub candidate_threshold: f64,
    /// EOS probability at which EOS-only segmentation cuts.
    pub eos_threshold: f64,
    /// EOS-only segmentation: always close a segment at the final token.
    pub force_last_eos: bool,
    /// Positive probabilities and their complements are floored at this
    /// value inside logarithms. An exact zero keeps log-probability -inf.
    pub prob_floor: f64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            candidate_threshold: 0.1,
            eos_threshold: 0.5,
            force_last_eos: false,
            prob_floor: 1e-12,
        }
    }
}

impl DecoderConfig {
    pub fn validate(&self) -> Result<(), DecodeError> {
        if !(0.0..=1.0).contains(&self.candidate_threshold) {
            return Err(DecodeError::Threshold(self.candidate_threshold));
        }
        if !(0.0..=1.0).contains(&self.eos_threshold) {
            return Err(DecodeError::Threshold(self.eos_threshold));
        }
        if !(self.prob_floor > 0.0 && self.prob_floor < 0.5) {
            return Err(DecodeError::Floor(self.prob_floor));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// EOS-only segmentation; a trailing segment without EOS is not an SU.
    #[serde(alias = "EOS")]
    Eos,
    /// EOS-only segmentation with the final token forced to EOS.
    #[serde(alias = "eos-force", alias = "EOS+force")]
    EosForce,
    #[default]
    #[serde(alias = "bosEos", alias = "bos-eos")]
    BosEos,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Eos, Method::EosForce, Method::BosEos];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Eos => "eos",
            Method::EosForce => "eos-force",
            Method::BosEos => "bosEos",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = DecodeError;

    fn from_str(s: &str) -> Result<Method, DecodeError> {
        match s {
            "eos" | "EOS" => Ok(Method::Eos),
            "eos-force" | "eos_force" | "EOS+force" => Ok(Method::EosForce),
            "bosEos" | "bos_eos" | "bos-eos" => Ok(Method::BosEos),
            _ => Err(DecodeError::UnknownMethod(s.to_string())),
        }
    }
}

/// Decoded SU spans over word tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanResult {
    /// `[start, end)` token ranges, ascending and disjoint.
    pub spans: Vec<(usize, usize)>,
    pub labels: LabelSeq,
    /// Log-score of the labeling (the decoder's objective).
    pub log_prob: f64,
}

impl SpanResult {
    fn from_labels(labels: Vec<Label>, log_prob: f64) -> SpanResult {
        let labels = LabelSeq::new(Granularity::Word, labels);
        SpanResult {
            spans: labels.spans(),
            labels,
            log_prob,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn to_record(&self) -> SpanRecord {
        SpanRecord {
            spans: self.spans.iter().map(|&(s, e)| [s, e]).collect(),
            labels: self.labels.to_string(),
            log_prob: self.log_prob.is_finite().then_some(self.log_prob),
        }
    }
}

/// JSON form of a [`SpanResult`]. An impossible labeling (log-probability
/// -inf) is written with `log_prob: null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanRecord {
    pub spans: Vec<[usize; 2]>,
    pub labels: String,
    pub log_prob: Option<f64>,
}

impl SpanRecord {
    pub fn into_result(self) -> Result<SpanResult, LabelError> {
        let labels = LabelSeq::parse(Granularity::Word, &self.labels)?;
        labels.validate()?;
        let spans: Vec<(usize, usize)> = self.spans.iter().map(|s| (s[0], s[1])).collect();
        if spans != labels.spans() {
            return Err(LabelError::Format("spans disagree with labels".into()));
        }
        Ok(SpanResult {
            spans,
            labels,
            log_prob: self.log_prob.unwrap_or(f64::NEG_INFINITY),
        })
    }
}

pub fn write_spans_jsonl<W: Write>(mut w: W, results: &[SpanResult]) -> std::io::Result<()> {
    for r in results {
        serde_json::to_writer(&mut w, &r.to_record())?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_spans_jsonl<R: BufRead>(reader: R) -> Result<Vec<SpanResult>, DecodeError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fmt = |msg: String| DecodeError::Format { line: i + 1, msg };
        let rec: SpanRecord = serde_json::from_str(&line).map_err(|e| fmt(e.to_string()))?;
        out.push(rec.into_result().map_err(|e| fmt(e.to_string()))?);
    }
    Ok(out)
}

// ln p with positive arguments floored; a zero probability stays impossible
fn log_p(p: f64, floor: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else {
        p.max(floor).ln()
    }
}

// ln(1-p) with its argument floored; exactly 0 when p == 0
fn log_q(p: f64, floor: f64) -> f64 {
    (-p).ln_1p().max(floor.ln())
}

/// Log-score of `labels` under the boundary model, ignoring the candidate
/// threshold: every token contributes one BOS and one EOS factor.
pub fn labeling_log_prob(m: &ProbMatrix, labels: &LabelSeq, floor: f64) -> f64 {
    let n = labels.len();
    let mut total = 0.0;
    for i in 0..n {
        let l = labels.labels[i];
        let b = m.p_bos[i];
        let e = m.p_eos[i];
        total += if l == Label::B { log_p(b, floor) } else { log_q(b, floor) };
        let ends = l.in_span() && labels.labels.get(i + 1) != Some(&Label::I);
        total += if ends { log_p(e, floor) } else { log_q(e, floor) };
    }
    total
}

/// `log p_NSU(W[start..end]) = Σ log(1 - p_bos) + log(1 - p_eos)`.
pub fn nsu_log_score(m: &ProbMatrix, start: usize, end: usize, floor: f64) -> f64 {
    extend_nsu_log_score(0.0, m, start, end, floor)
}

/// Continues an NSU score accumulated up to `start`. Accumulation runs
/// token by token, so extending `score(i..j)` over `j..k` reproduces
/// `score(i..k)` bit for bit.
pub fn extend_nsu_log_score(acc: f64, m: &ProbMatrix, start: usize, end: usize, floor: f64) -> f64 {
    (start..end).fold(acc, |acc, i| (acc + log_q(m.p_bos[i], floor)) + log_q(m.p_eos[i], floor))
}

/// EOS-only segmentation.
pub fn segment_eos_only(m: &ProbMatrix, cfg: &DecoderConfig) -> SpanResult {
    let n = m.len();
    let mut labels = vec![Label::O; n];
    let mut start = 0;
    for i in 0..n {
        let eos = m.p_eos[i] >= cfg.eos_threshold || (cfg.force_last_eos && i + 1 == n);
        if eos {
            labels[start] = Label::B;
            for l in &mut labels[start + 1..=i] {
                *l = Label::I;
            }
            start = i + 1;
        }
    }
    let labels = LabelSeq::new(Granularity::Word, labels);
    let log_prob = labeling_log_prob(m, &labels, cfg.prob_floor);
    SpanResult {
        spans: labels.spans(),
        labels,
        log_prob,
    }
}

/// Forward pass of the BOS&EOS decoder with back-pointers.
#[derive(Debug, Clone, PartialEq)]
pub struct DpTrace {
    /// `log_is[i]`: best score of `W[..i]` ending inside an open span.
    pub log_is: Vec<f64>,
    /// `log_os[i]`: best score of `W[..i]` ending outside every span.
    pub log_os: Vec<f64>,
    /// Token `i` starts a span on the best path into the inside state.
    pub opened: Vec<bool>,
    /// Token `i` ends a span on the best path into the outside state.
    pub closed: Vec<bool>,
}

impl DpTrace {
    pub fn forward(m: &ProbMatrix, cfg: &DecoderConfig) -> DpTrace {
        let n = m.len();
        let c = cfg.candidate_threshold;
        let floor = cfg.prob_floor;
        let mut t = DpTrace {
            log_is: Vec::with_capacity(n + 1),
            log_os: Vec::with_capacity(n + 1),
            opened: vec![false; n],
            closed: vec![false; n],
        };
        let (mut is, mut os) = (f64::NEG_INFINITY, 0.0);
        t.log_is.push(is);
        t.log_os.push(os);
        for i in 0..n {
            let b = m.p_bos[i];
            if b >= c {
                let stay = is + log_q(b, floor);
                let open = os + log_p(b, floor);
                // ties open a span
                t.opened[i] = open >= stay;
                is = if t.opened[i] { open } else { stay };
                os += log_q(b, floor);
            }
            let e = m.p_eos[i];
            if e >= c {
                let close = is + log_p(e, floor);
                let stay = os + log_q(e, floor);
                // ties close the span
                t.closed[i] = close >= stay;
                os = if t.closed[i] { close } else { stay };
                is += log_q(e, floor);
            }
            t.log_is.push(is);
            t.log_os.push(os);
        }
        t
    }

    pub fn backtrack(&self) -> Vec<Label> {
        let n = self.opened.len();
        let mut labels = vec![Label::O; n];
        let mut inside = false;
        for i in (0..n).rev() {
            // undo the EOS step
            if !inside && self.closed[i] {
                inside = true;
            }
            // undo the BOS step
            if inside {
                if self.opened[i] {
                    labels[i] = Label::B;
                    inside = false;
                } else {
                    labels[i] = Label::I;
                }
            }
        }
        labels
    }
}

/// BOS&EOS decoding of one sequence.
pub fn identify(m: &ProbMatrix, cfg: &DecoderConfig) -> SpanResult {
    let trace = DpTrace::forward(m, cfg);
    let log_prob = *trace.log_os.last().unwrap();
    SpanResult::from_labels(trace.backtrack(), log_prob)
}

/// Concatenates results of consecutive segments into one.
pub fn merge_segment_results(results: &[SpanResult]) -> SpanResult {
    let mut labels = Vec::new();
    let mut log_prob = 0.0;
    for r in results {
        labels.extend_from_slice(&r.labels.labels);
        log_prob += r.log_prob;
    }
    SpanResult::from_labels(labels, log_prob)
}

/// Decodes each segment independently; spans never cross segment borders.
pub fn identify_segments(segments: &[ProbMatrix], cfg: &DecoderConfig, execution: Execution) -> Vec<SpanResult> {
    exec::map(execution, segments, |m| identify(m, cfg))
}

/// Splits `m` before every index in `cuts` (ascending), decodes the pieces
/// independently and merges them.
pub fn identify_with_cuts(m: &ProbMatrix, cuts: &[usize], cfg: &DecoderConfig, execution: Execution) -> SpanResult {
    let mut bounds = vec![0];
    bounds.extend(cuts.iter().copied().filter(|&c| c > 0 && c < m.len()));
    bounds.push(m.len());
    bounds.dedup();
    let pieces: Vec<ProbMatrix> = bounds.windows(2).map(|w| m.slice(w[0], w[1])).collect();
    merge_segment_results(&identify_segments(&pieces, cfg, execution))
}

pub fn decode(m: &ProbMatrix, method: Method, cfg: &DecoderConfig) -> SpanResult {
    match method {
        Method::Eos => segment_eos_only(m, &DecoderConfig { force_last_eos: false, ..*cfg }),
        Method::EosForce => segment_eos_only(m, &DecoderConfig { force_last_eos: true, ..*cfg }),
        Method::BosEos => identify(m, cfg),
    }
}

pub fn decode_batch(ms: &[ProbMatrix], method: Method, cfg: &DecoderConfig, execution: Execution) -> Vec<SpanResult> {
    exec::map(execution, ms, |m| decode(m, method, cfg))
}
