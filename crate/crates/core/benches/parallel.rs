use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use sentid::augment::{self, AugmentConfig};
use sentid::decode::{self, DecoderConfig, Method};
use sentid::eval;
use sentid::exec::Execution;
use sentid::labels::Granularity;
use sentid::model::{self, FeatureConfig, ModelConfig};
use sentid::synth;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn model_config() -> ModelConfig {
    ModelConfig {
        features: FeatureConfig { hash_bits: 16, ..Default::default() },
        epochs: 1,
        ..Default::default()
    }
}

fn batch_stages(c: &mut Criterion) {
    let train = synth::generate_units(1000, 0.3, 1);
    let test = synth::generate_units(2000, 0.3, 2);
    let model = model::train(&train, &AugmentConfig::default(), &model_config(), Execution::Parallel).unwrap();
    let docs = augment::build_documents(&test, 0.5, 512, 3);
    let words: Vec<Vec<String>> = docs.iter().map(|d| d.words()).collect();
    let probs = model::predict_batch(&model, &words, false, Execution::Parallel).unwrap();
    let dcfg = DecoderConfig::default();
    let spans = decode::decode_batch(&probs, Method::BosEos, &dcfg, Execution::Parallel);

    let mut g = c.benchmark_group("predict_batch");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| model::predict_batch(&model, black_box(&words), false, exec).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("decode_batch");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| decode::decode_batch(black_box(&probs), Method::BosEos, &dcfg, exec))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("evaluate_documents");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| eval::evaluate_documents(black_box(&docs), &spans, Granularity::Char, exec).unwrap())
        });
    }
    g.finish();
}

fn training(c: &mut Criterion) {
    let train = synth::generate_units(1000, 0.3, 4);
    let aug = AugmentConfig::default();
    let cfg = model_config();
    let mut g = c.benchmark_group("train");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| model::train(black_box(&train), &aug, &cfg, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, batch_stages, training);
criterion_main!(benches);
