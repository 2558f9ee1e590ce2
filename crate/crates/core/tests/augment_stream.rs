use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sentid::augment::{self, AugmentConfig, ExampleStream, Transform};
use sentid::corpus::Unit;
use sentid::synth;

fn clean_sus(n: usize, seed: u64) -> Vec<Unit> {
    synth::generate_units(n, 0.0, seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn examples_respect_alternation_and_cap(
        n in 1usize..120,
        p_cc in 0.0..=1.0f64,
        p_da in 0.0..=1.0f64,
        p_tr in 0.0..=1.0f64,
        max_tokens in 1usize..80,
        seed in any::<u64>(),
    ) {
        let units = synth::generate_units(n, 0.3, seed);
        let cfg = AugmentConfig { p_cc, p_da, p_tr, max_tokens, seed, ..Default::default() };
        let mut covered = 0;
        for ex in ExampleStream::new(&units, &cfg, 0) {
            prop_assert!(ex.gold().validate().is_ok());
            prop_assert!(ex.len() <= max_tokens && !ex.is_empty());
            for (u, p) in ex.units.iter().zip(&ex.provenance) {
                prop_assert!(u.validate().is_ok());
                prop_assert_eq!(p.unit, covered);
                covered += 1;
            }
        }
        prop_assert_eq!(covered, units.len());
    }

    #[test]
    fn unit_augmentation_only_strips_a_suffix(seed in any::<u64>(), p_da in 0.0..=1.0f64) {
        let units = synth::generate_units(30, 0.3, seed);
        let cfg = AugmentConfig { p_da, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for u in &units {
            let (out, t) = augment::augment_unit(u, &cfg, &mut rng);
            prop_assert_eq!(out.is_su, u.is_su);
            if t == Some(Transform::StripPunct) {
                prop_assert!(out.len() <= u.len());
                prop_assert!(u.text.starts_with(&out.text));
            } else {
                prop_assert_eq!(out.len(), u.len());
            }
        }
    }
}

#[test]
fn streams_are_reproducible() {
    let units = synth::generate_units(300, 0.3, 4);
    let cfg = AugmentConfig { seed: 99, ..Default::default() };
    let a: Vec<_> = ExampleStream::new(&units, &cfg, 2).collect();
    let b: Vec<_> = ExampleStream::new(&units, &cfg, 2).collect();
    assert_eq!(a, b);
    let mut buf_a = Vec::new();
    let mut buf_b = Vec::new();
    augment::write_examples_jsonl(&mut buf_a, &a).unwrap();
    augment::write_examples_jsonl(&mut buf_b, &b).unwrap();
    assert_eq!(buf_a, buf_b);
}

#[test]
fn transform_rate_converges_to_p_da() {
    let units = clean_sus(20_000, 5);
    for p_da in [0.1, 0.3, 0.6] {
        let cfg = AugmentConfig { p_da, p_tr: 0.0, seed: 1, ..Default::default() };
        let (mut total, mut transformed) = (0usize, 0usize);
        for ex in ExampleStream::new(&units, &cfg, 0) {
            total += ex.provenance.len();
            transformed += ex.provenance.iter().filter(|p| p.transform.is_some()).count();
        }
        let rate = transformed as f64 / total as f64;
        assert!((rate - p_da).abs() < 0.02, "p_da {p_da}: rate {rate}");
    }
}

#[test]
fn truncation_rate_and_relabelling() {
    let units = clean_sus(20_000, 6);
    let cfg = AugmentConfig { p_da: 0.0, p_tr: 0.5, seed: 2, ..Default::default() };
    let (mut examples, mut heads) = (0usize, 0usize);
    for ex in ExampleStream::new(&units, &cfg, 0) {
        examples += 1;
        let first = &ex.provenance[0];
        if first.truncated_head {
            heads += 1;
            assert!(!ex.units[0].is_su);
        } else {
            assert!(ex.units[0].is_su || first.truncated_tail);
        }
    }
    // a head cut is drawn with p_tr and removes at least one word unless the
    // position drawn is the first one
    let rate = heads as f64 / examples as f64;
    assert!(rate > 0.3 && rate < 0.5, "{rate}");
}

#[test]
fn evaluation_documents_are_plain_concatenations() {
    let units = synth::generate_units(500, 0.3, 7);
    for p_cc in [0.0, 0.5, 1.0] {
        let docs = augment::build_documents(&units, p_cc, 512, 3);
        let flat: Vec<Unit> = docs.iter().flat_map(|d| d.units.clone()).collect();
        assert_eq!(flat, units);
        if p_cc == 1.0 {
            assert_eq!(docs.len(), units.len());
        }
    }
}
