use proptest::prelude::*;

use sentid::augment::AugmentConfig;
use sentid::decode::{self, DecoderConfig, Method};
use sentid::exec::Execution;
use sentid::labels;
use sentid::model::{self, ClassifierModel, FeatureConfig, ModelConfig, ProbMatrix};
use sentid::synth;

fn small_model(seed: u64) -> ClassifierModel {
    let units = synth::generate_units(150, 0.3, 1);
    let cfg = ModelConfig {
        features: FeatureConfig { hash_bits: 12, window: 3, ..Default::default() },
        epochs: 2,
        seed,
        ..Default::default()
    };
    model::train(&units, &AugmentConfig::default(), &cfg, Execution::Parallel).unwrap()
}

#[test]
fn unidirectional_scores_ignore_the_far_side() {
    let m = small_model(3);
    let words: Vec<String> = "Thanks for the help ! 02/13/2001 08:02 PM We fixed the car ."
        .split(' ')
        .map(String::from)
        .collect();
    let base = model::predict(&m, &words, true).unwrap();
    for i in 0..words.len() {
        for j in 0..words.len() {
            if j == i {
                continue;
            }
            let mut changed = words.clone();
            changed[j] = "ZZZ".into();
            let p = model::predict(&m, &changed, true).unwrap();
            if j > i {
                assert_eq!(p.p_eos_uni.as_ref().unwrap()[i], base.p_eos_uni.as_ref().unwrap()[i]);
            } else {
                assert_eq!(p.p_bos_uni.as_ref().unwrap()[i], base.p_bos_uni.as_ref().unwrap()[i]);
            }
        }
    }
}

#[test]
fn training_is_byte_reproducible() {
    let save = |m: &ClassifierModel| {
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        buf
    };
    assert_eq!(save(&small_model(5)), save(&small_model(5)));
    assert_ne!(save(&small_model(5)), save(&small_model(6)));
}

#[test]
fn predict_is_pure() {
    let m = small_model(1);
    let words = ["see", "you", "tomorrow", "."];
    assert_eq!(model::predict(&m, &words, true).unwrap(), model::predict(&m, &words, true).unwrap());
}

fn arb_matrix() -> impl Strategy<Value = ProbMatrix> {
    (0usize..60).prop_flat_map(|n| {
        (prop::collection::vec(0.0..=1.0f64, n), prop::collection::vec(0.0..=1.0f64, n))
            .prop_map(|(b, e)| ProbMatrix::new(b, e).unwrap())
    })
}

proptest! {
    #[test]
    fn decoded_labels_always_alternate(m in arb_matrix(), c in 0.0..=1.0f64) {
        let cfg = DecoderConfig { candidate_threshold: c, ..Default::default() };
        for method in Method::ALL {
            let r = decode::decode(&m, method, &cfg);
            prop_assert_eq!(r.len(), m.len());
            let b = labels::bio_to_boundaries(&r.labels);
            prop_assert!(b.is_ok());
            prop_assert_eq!(r.spans.clone(), r.labels.spans());
            prop_assert!(!r.log_prob.is_nan());
        }
    }

    #[test]
    fn decoded_log_prob_is_the_labeling_score(m in arb_matrix()) {
        let cfg = DecoderConfig { candidate_threshold: 0.0, ..Default::default() };
        let r = decode::identify(&m, &cfg);
        let s = decode::labeling_log_prob(&m, &r.labels, cfg.prob_floor);
        prop_assert!((r.log_prob - s).abs() <= 1e-9 * s.abs().max(1.0));
    }

    #[test]
    fn spans_never_cross_cuts(m in arb_matrix(), cut in 0usize..60) {
        let r = decode::identify_with_cuts(&m, &[cut], &DecoderConfig::default(), Execution::Sequential);
        prop_assert_eq!(r.len(), m.len());
        for (s, e) in r.spans {
            prop_assert!(e <= cut || s >= cut);
        }
    }

    #[test]
    fn prob_files_round_trip(m in arb_matrix()) {
        let tokens: Vec<String> = (0..m.len()).map(|i| format!("t{i}")).collect();
        let mut buf = Vec::new();
        model::write_probs(&mut buf, &tokens, &m).unwrap();
        let doc = model::load_probs(buf.as_slice()).unwrap();
        prop_assert_eq!(doc.probs, m);
    }
}
