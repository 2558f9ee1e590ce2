use proptest::prelude::*;

use sentid::augment::{self, TrainingExample};
use sentid::decode::SpanResult;
use sentid::eval;
use sentid::exec::Execution;
use sentid::labels::{Granularity, Label, LabelSeq};
use sentid::synth;

fn arb_labels(n: usize) -> impl Strategy<Value = Vec<Label>> {
    prop::collection::vec(0u8..3, n).prop_map(|xs| {
        let mut out: Vec<Label> = Vec::with_capacity(xs.len());
        for x in xs {
            let open = out.last().is_some_and(|l| l.in_span());
            out.push(match x {
                0 => Label::B,
                1 if open => Label::I,
                _ => Label::O,
            });
        }
        out
    })
}

fn arb_pair() -> impl Strategy<Value = (Vec<Label>, Vec<Label>)> {
    (0usize..30).prop_flat_map(|n| (arb_labels(n), arb_labels(n)))
}

fn prediction(_doc: &TrainingExample, labels: Vec<Label>) -> SpanResult {
    let labels = LabelSeq::new(Granularity::Word, labels);
    SpanResult { spans: labels.spans(), labels, log_prob: 0.0 }
}

proptest! {
    #[test]
    fn span_f1_is_one_iff_sets_match((g, p) in arb_pair()) {
        let g = LabelSeq::new(Granularity::Word, g);
        let p = LabelSeq::new(Granularity::Word, p);
        let s = eval::span_f1(&g.spans(), &p.spans());
        prop_assert_eq!(s.f1 == 1.0, g.spans() == p.spans());
    }

    #[test]
    fn macro_and_weighted_are_means((g, p) in arb_pair()) {
        let r = eval::bio_f1(&LabelSeq::new(Granularity::Word, g), &LabelSeq::new(Granularity::Word, p)).unwrap();
        if !r.per_label.is_empty() {
            let mean = r.per_label.values().map(|s| s.f1).sum::<f64>() / r.per_label.len() as f64;
            prop_assert!((r.macro_f1 - mean).abs() < 1e-15);
            let support: usize = r.per_label.values().map(|s| s.support).sum();
            let weighted = r.per_label.values().map(|s| s.f1 * s.support as f64).sum::<f64>() / support as f64;
            prop_assert!((r.weighted_f1 - weighted).abs() < 1e-15);
        }
    }

    #[test]
    fn scores_are_permutation_invariant(seed in any::<u64>(), rot in 0usize..10) {
        let units = synth::generate_units(60, 0.3, seed);
        let docs = augment::build_documents(&units, 0.5, 512, seed);
        let preds: Vec<SpanResult> = docs
            .iter()
            .enumerate()
            .map(|(k, d)| {
                // a deliberately imperfect prediction: every k-th document all O
                let mut l = d.gold_labels(Granularity::Word).labels;
                if k % 3 == 0 {
                    l.iter_mut().for_each(|x| *x = Label::O);
                }
                prediction(d, l)
            })
            .collect();
        for g in [Granularity::Word, Granularity::Char] {
            let a = eval::evaluate_documents(&docs, &preds, g, Execution::Sequential).unwrap();
            let mut d2 = docs.clone();
            let mut p2 = preds.clone();
            let k = rot % d2.len().max(1);
            d2.rotate_left(k);
            p2.rotate_left(k);
            d2.reverse();
            p2.reverse();
            let b = eval::evaluate_documents(&d2, &p2, g, Execution::Parallel).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn b_support_is_granularity_invariant(seed in any::<u64>()) {
        let units = synth::generate_units(40, 0.4, seed);
        let docs = augment::build_documents(&units, 0.3, 512, seed);
        let preds: Vec<SpanResult> =
            docs.iter().map(|d| prediction(d, d.gold_labels(Granularity::Word).labels)).collect();
        let w = eval::evaluate_documents(&docs, &preds, Granularity::Word, Execution::Sequential).unwrap();
        let c = eval::evaluate_documents(&docs, &preds, Granularity::Char, Execution::Sequential).unwrap();
        prop_assert_eq!(w.per_label.get("B").map(|s| s.support), c.per_label.get("B").map(|s| s.support));
        // a perfect word prediction is perfect at character level too
        prop_assert_eq!(c.span.f1, 1.0);
    }
}

#[test]
fn hand_computed_example() {
    let g = LabelSeq::parse(Granularity::Word, "BIO").unwrap();
    let p = LabelSeq::parse(Granularity::Word, "BII").unwrap();
    let r = eval::bio_f1(&g, &p).unwrap();
    assert_eq!(r.per_label["B"].f1, 1.0);
    assert!((r.per_label["I"].f1 - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(r.per_label["O"].f1, 0.0);
    assert_eq!(r.span.f1, 0.0);
}

#[test]
fn fragmented_gold_is_relabelled() {
    let units = synth::generate_units(20, 0.0, 3);
    let cut = units[0].len() + 1;
    let fixed = eval::fragment_units(&units, &[cut]);
    assert_eq!(fixed.len(), units.len() + 1);
    assert!(!fixed[1].is_su && !fixed[2].is_su);
    let words = |us: &[sentid::Unit]| us.iter().flat_map(|u| u.words.clone()).collect::<Vec<_>>();
    assert_eq!(words(&fixed), words(&units));
}
