//! Scoring predicted spans against gold BIO labels.
//!
//! Label-level scores pool confusion counts over all documents before
//! dividing. Macro F1 averages over the labels that occur in the gold or the
//! predicted sequences; weighted F1 weights each label by its gold support.
//! Span scores count exact `[start, end)` matches.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::TrainingExample;
use crate::corpus::Unit;
use crate::decode::SpanResult;
use crate::exec::{self, Execution};
use crate::labels::{coarse_to_chars, Granularity, Label, LabelError, LabelSeq};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("gold has {gold} labels but prediction has {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("cannot combine {0} and {1} granularity")]
    MixedGranularity(Granularity, Granularity),
    #[error("{gold} gold documents but {pred} predictions")]
    DocumentCount { gold: usize, pred: usize },
    #[error("no reports to aggregate")]
    NoReports,
    #[error("{0} evaluation needs a subword tokenizer")]
    Unsupported(Granularity),
    #[error(transparent)]
    Labels(#[from] LabelError),
}

/// Confusion counts for one label.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Pooled counts, mergeable across documents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub granularity: Granularity,
    /// Indexed B, I, O.
    pub labels: [Confusion; 3],
    pub span_tp: usize,
    pub span_gold: usize,
    pub span_pred: usize,
}

fn index(l: Label) -> usize {
    match l {
        Label::B => 0,
        Label::I => 1,
        Label::O => 2,
    }
}

impl EvalCounts {
    pub fn new(granularity: Granularity) -> EvalCounts {
        EvalCounts {
            granularity,
            labels: [Confusion::default(); 3],
            span_tp: 0,
            span_gold: 0,
            span_pred: 0,
        }
    }

    pub fn of(gold: &LabelSeq, pred: &LabelSeq) -> Result<EvalCounts, EvalError> {
        let mut c = EvalCounts::new(gold.granularity);
        c.add(gold, pred)?;
        Ok(c)
    }

    pub fn add(&mut self, gold: &LabelSeq, pred: &LabelSeq) -> Result<(), EvalError> {
        for g in [gold.granularity, pred.granularity] {
            if g != self.granularity {
                return Err(EvalError::MixedGranularity(self.granularity, g));
            }
        }
        if gold.len() != pred.len() {
            return Err(EvalError::LengthMismatch { gold: gold.len(), pred: pred.len() });
        }
        for (&g, &p) in gold.labels.iter().zip(&pred.labels) {
            if g == p {
                self.labels[index(g)].tp += 1;
            } else {
                self.labels[index(p)].fp += 1;
                self.labels[index(g)].fn_ += 1;
            }
        }
        let gs: BTreeSet<(usize, usize)> = gold.spans().into_iter().collect();
        let ps: BTreeSet<(usize, usize)> = pred.spans().into_iter().collect();
        self.span_tp += gs.intersection(&ps).count();
        self.span_gold += gs.len();
        self.span_pred += ps.len();
        Ok(())
    }

    pub fn merge(mut self, other: &EvalCounts) -> Result<EvalCounts, EvalError> {
        if self.granularity != other.granularity {
            return Err(EvalError::MixedGranularity(self.granularity, other.granularity));
        }
        for (a, b) in self.labels.iter_mut().zip(&other.labels) {
            a.tp += b.tp;
            a.fp += b.fp;
            a.fn_ += b.fn_;
        }
        self.span_tp += other.span_tp;
        self.span_gold += other.span_gold;
        self.span_pred += other.span_pred;
        Ok(self)
    }

    pub fn report(&self) -> EvalReport {
        let mut per_label = BTreeMap::new();
        for l in Label::ALL {
            let c = self.labels[index(l)];
            let support = c.tp + c.fn_;
            if support + c.fp == 0 {
                continue;
            }
            let precision = ratio(c.tp, c.tp + c.fp);
            let recall = ratio(c.tp, support);
            per_label.insert(
                l.to_string(),
                LabelScore {
                    precision,
                    recall,
                    f1: f1(precision, recall),
                    support,
                },
            );
        }
        let macro_f1 = if per_label.is_empty() {
            0.0
        } else {
            per_label.values().map(|s| s.f1).sum::<f64>() / per_label.len() as f64
        };
        let total: usize = per_label.values().map(|s| s.support).sum();
        let weighted_f1 = if total == 0 {
            0.0
        } else {
            per_label.values().map(|s| s.f1 * s.support as f64).sum::<f64>() / total as f64
        };
        EvalReport {
            granularity: self.granularity,
            per_label,
            macro_f1,
            weighted_f1,
            span: SpanScore::from_counts(self.span_tp, self.span_gold, self.span_pred),
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpanScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matched: usize,
    pub gold: usize,
    pub predicted: usize,
    /// Neither side has any span; the scores are 1 by convention.
    pub vacuous: bool,
}

impl SpanScore {
    pub fn from_counts(matched: usize, gold: usize, predicted: usize) -> SpanScore {
        if gold == 0 && predicted == 0 {
            return SpanScore {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
                matched,
                gold,
                predicted,
                vacuous: true,
            };
        }
        let precision = ratio(matched, predicted);
        let recall = ratio(matched, gold);
        SpanScore {
            precision,
            recall,
            f1: f1(precision, recall),
            matched,
            gold,
            predicted,
            vacuous: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub granularity: Granularity,
    /// Keyed by label; labels absent from both gold and prediction are left out.
    pub per_label: BTreeMap<String, LabelScore>,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub span: SpanScore,
}

impl EvalReport {
    /// Flat metric map used for aggregation and tables.
    pub fn metrics(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        for (l, s) in &self.per_label {
            m.insert(format!("{l}_precision"), s.precision);
            m.insert(format!("{l}_recall"), s.recall);
            m.insert(format!("{l}_f1"), s.f1);
        }
        m.insert("macro_f1".into(), self.macro_f1);
        m.insert("weighted_f1".into(), self.weighted_f1);
        m.insert("span_precision".into(), self.span.precision);
        m.insert("span_recall".into(), self.span.recall);
        m.insert("span_f1".into(), self.span.f1);
        m
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} level", self.granularity);
        let _ = writeln!(out, "{:<10} {:>9} {:>9} {:>9} {:>9}", "label", "precision", "recall", "f1", "support");
        for (l, s) in &self.per_label {
            let _ = writeln!(
                out,
                "{:<10} {:>9.4} {:>9.4} {:>9.4} {:>9}",
                l, s.precision, s.recall, s.f1, s.support
            );
        }
        let _ = writeln!(out, "{:<10} {:>9} {:>9} {:>9.4}", "macro", "", "", self.macro_f1);
        let _ = writeln!(out, "{:<10} {:>9} {:>9} {:>9.4}", "weighted", "", "", self.weighted_f1);
        let s = &self.span;
        let _ = writeln!(
            out,
            "{:<10} {:>9.4} {:>9.4} {:>9.4} {:>9}{}",
            "span",
            s.precision,
            s.recall,
            s.f1,
            s.gold,
            if s.vacuous { "  (no spans)" } else { "" }
        );
        out
    }
}

/// Label and span scores for one gold/prediction pair.
pub fn bio_f1(gold: &LabelSeq, pred: &LabelSeq) -> Result<EvalReport, EvalError> {
    Ok(EvalCounts::of(gold, pred)?.report())
}

/// Exact-match span scores.
pub fn span_f1(gold: &[(usize, usize)], pred: &[(usize, usize)]) -> SpanScore {
    let gs: BTreeSet<_> = gold.iter().collect();
    let ps: BTreeSet<_> = pred.iter().collect();
    SpanScore::from_counts(gs.intersection(&ps).count(), gs.len(), ps.len())
}

/// Prediction labels at the requested granularity for one document.
pub fn prediction_labels(doc: &TrainingExample, pred: &SpanResult, granularity: Granularity) -> Result<LabelSeq, EvalError> {
    let words = doc.len();
    if pred.len() != words {
        return Err(EvalError::LengthMismatch { gold: words, pred: pred.len() });
    }
    match granularity {
        Granularity::Word => Ok(pred.labels.clone()),
        Granularity::Char => {
            let layout = doc.layout();
            Ok(coarse_to_chars(&pred.labels, &layout.lengths, &layout.separators)?)
        }
        Granularity::Subword => Err(EvalError::Unsupported(granularity)),
    }
}

pub fn document_counts(doc: &TrainingExample, pred: &SpanResult, granularity: Granularity) -> Result<EvalCounts, EvalError> {
    let p = prediction_labels(doc, pred, granularity)?;
    EvalCounts::of(&doc.gold_labels(granularity), &p)
}

pub fn evaluate_document(doc: &TrainingExample, pred: &SpanResult, granularity: Granularity) -> Result<EvalReport, EvalError> {
    Ok(document_counts(doc, pred, granularity)?.report())
}

/// Pools counts over all documents, then scores.
pub fn evaluate_documents(
    docs: &[TrainingExample],
    preds: &[SpanResult],
    granularity: Granularity,
    execution: Execution,
) -> Result<EvalReport, EvalError> {
    if docs.len() != preds.len() {
        return Err(EvalError::DocumentCount { gold: docs.len(), pred: preds.len() });
    }
    let pairs: Vec<(&TrainingExample, &SpanResult)> = docs.iter().zip(preds).collect();
    let counts = exec::map_reduce(
        execution,
        &pairs,
        Ok(EvalCounts::new(granularity)),
        |(d, p)| document_counts(d, p, granularity),
        |acc, next| acc?.merge(&next?),
    )?;
    Ok(counts.report())
}

/// Splits every unit that straddles one of the token `cuts` into pieces;
/// each piece of a split unit becomes an NSU, since no SU can be recovered
/// from a fragment.
pub fn fragment_units(units: &[Unit], cuts: &[usize]) -> Vec<Unit> {
    let mut out = Vec::new();
    let mut pos = 0;
    for u in units {
        let inner: Vec<usize> = cuts
            .iter()
            .filter(|&&c| c > pos && c < pos + u.len())
            .map(|&c| c - pos)
            .collect();
        if inner.is_empty() {
            out.push(u.clone());
        } else {
            let gaps = u.gaps();
            let mut bounds = vec![0];
            bounds.extend(inner);
            bounds.push(u.len());
            bounds.dedup();
            for w in bounds.windows(2) {
                let (s, e) = (w[0], w[1]);
                out.push(Unit::from_words_and_gaps(u.words[s..e].to_vec(), &gaps[s..e], false));
            }
        }
        pos += u.len();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
    pub runs: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> MeanStd {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        MeanStd { mean, std, runs: n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub granularity: Granularity,
    pub runs: usize,
    /// Only one run: standard deviations are meaningless.
    pub single_run: bool,
    pub metrics: BTreeMap<String, MeanStd>,
}

impl AggregateReport {
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} level, {} run{}",
            self.granularity,
            self.runs,
            if self.single_run { " (no deviation)" } else { "s" }
        );
        let _ = writeln!(out, "{:<16} {:>9} {:>9}", "metric", "mean", "std");
        for (k, v) in &self.metrics {
            let _ = writeln!(out, "{:<16} {:>9.4} {:>9.4}", k, v.mean, v.std);
        }
        out
    }
}

/// Mean and sample standard deviation of every metric across runs. A
/// per-label metric is averaged over the runs in which that label occurs.
pub fn aggregate(reports: &[EvalReport]) -> Result<AggregateReport, EvalError> {
    let first = reports.first().ok_or(EvalError::NoReports)?;
    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in reports {
        if r.granularity != first.granularity {
            return Err(EvalError::MixedGranularity(first.granularity, r.granularity));
        }
        for (k, v) in r.metrics() {
            values.entry(k).or_default().push(v);
        }
    }
    Ok(AggregateReport {
        granularity: first.granularity,
        runs: reports.len(),
        single_run: reports.len() == 1,
        metrics: values.into_iter().map(|(k, v)| (k, MeanStd::of(&v))).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::Provenance;

    fn seq(s: &str) -> LabelSeq {
        LabelSeq::parse(Granularity::Word, s).unwrap()
    }

    #[test]
    fn perfect_prediction() {
        let r = bio_f1(&seq("BIIOBI"), &seq("BIIOBI")).unwrap();
        assert_eq!(r.macro_f1, 1.0);
        assert_eq!(r.weighted_f1, 1.0);
        assert_eq!(r.span.f1, 1.0);
        assert!(!r.span.vacuous);
    }

    #[test]
    fn absent_labels_are_excluded_from_macro() {
        let r = bio_f1(&seq("BIBI"), &seq("BIII")).unwrap();
        assert!(!r.per_label.contains_key("O"));
        // B: p 1, r 1/2; I: p 2/3, r 1
        let fb = 2.0 * 0.5 / 1.5;
        let fi = 2.0 * (2.0 / 3.0) / (5.0 / 3.0);
        assert!((r.macro_f1 - (fb + fi) / 2.0).abs() < 1e-12);
        assert!((r.weighted_f1 - (fb * 2.0 + fi * 2.0) / 4.0).abs() < 1e-12);
        assert_eq!((r.span.matched, r.span.gold, r.span.predicted), (0, 2, 1));
    }

    #[test]
    fn empty_spans_are_vacuous() {
        let s = span_f1(&[], &[]);
        assert!(s.vacuous);
        assert_eq!(s.f1, 1.0);
        let s = span_f1(&[(0, 2)], &[]);
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn counts_are_pooled() {
        let a = EvalCounts::of(&seq("BI"), &seq("BI")).unwrap();
        let b = EvalCounts::of(&seq("OOOO"), &seq("BIOO")).unwrap();
        let r = a.merge(&b).unwrap().report();
        assert_eq!(r.per_label["B"].precision, 0.5);
        assert_eq!(r.per_label["O"].recall, 0.5);
        assert_eq!(r.span.matched, 1);
    }

    #[test]
    fn mismatches_are_errors() {
        assert!(matches!(bio_f1(&seq("BI"), &seq("B")), Err(EvalError::LengthMismatch { .. })));
        let chars = LabelSeq::parse(Granularity::Char, "BI").unwrap();
        assert!(matches!(bio_f1(&seq("BI"), &chars), Err(EvalError::MixedGranularity(..))));
        assert_eq!(aggregate(&[]), Err(EvalError::NoReports));
    }

    #[test]
    fn aggregate_mean_and_sample_std() {
        let a = bio_f1(&seq("BIO"), &seq("BIO")).unwrap();
        let b = bio_f1(&seq("BIO"), &seq("BOO")).unwrap();
        let agg = aggregate(&[a.clone(), b.clone()]).unwrap();
        let s = agg.metrics["span_f1"];
        assert_eq!(s.mean, 0.5);
        assert!((s.std - 0.5f64.sqrt()).abs() < 1e-12);
        let one = aggregate(&[a]).unwrap();
        assert!(one.single_run);
        assert_eq!(one.metrics["macro_f1"].std, 0.0);
    }

    #[test]
    fn char_level_document() {
        let units = vec![
            Unit::from_tokens(&[("Hi", false), (".", true)], true),
            Unit::from_words(&["***"], false),
        ];
        let doc = TrainingExample {
            provenance: (0..2).map(|i| Provenance { unit: i, transform: None, truncated_head: false, truncated_tail: false }).collect(),
            units,
        };
        let pred = SpanResult { spans: vec![(0, 2)], labels: seq("BIO"), log_prob: 0.0 };
        let r = evaluate_document(&doc, &pred, Granularity::Char).unwrap();
        assert_eq!(r.span.f1, 1.0);
        assert_eq!(r.macro_f1, 1.0);
        let bad = SpanResult { spans: vec![], labels: seq("OO"), log_prob: 0.0 };
        assert!(evaluate_document(&doc, &bad, Granularity::Word).is_err());
    }

    #[test]
    fn fragments_become_nsus() {
        let units = vec![Unit::from_words(&["a", "b", "c"], true), Unit::from_words(&["d"], true)];
        let out = fragment_units(&units, &[2, 3]);
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].words, vec!["a", "b"]);
        assert!(!out[0].is_su && !out[1].is_su);
        assert!(out[2].is_su);
    }
}
