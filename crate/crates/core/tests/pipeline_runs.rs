use std::fs;
use std::path::Path;

use sentid::corpus;
use sentid::decode::Method;
use sentid::labels::Granularity;
use sentid::pipeline::{self, PipelineConfig, PipelineError};
use sentid::synth;
use sentid::Unit;

fn config(seeds: Vec<u64>, out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::new(seeds, "unused".into(), "unused".into());
    cfg.model.epochs = 2;
    cfg.model.features.hash_bits = 14;
    cfg.paths.output_dir = Some(out.to_path_buf());
    cfg
}

fn data() -> (Vec<Unit>, Vec<Unit>) {
    (synth::generate_units(300, 0.3, 11), synth::generate_units(80, 0.3, 12))
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (train, test) = data();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = pipeline::run_on_units(&config(vec![7], a.path()), &train, &test, &Method::ALL).unwrap();
    let rb = pipeline::run_on_units(&config(vec![7], b.path()), &train, &test, &Method::ALL).unwrap();
    assert_eq!(ra, rb);
    let fa = files(a.path());
    assert!(fa.iter().any(|(n, _)| n.ends_with("model.bin")));
    assert_eq!(fa, files(b.path()));
}

#[test]
fn methods_share_probabilities_and_forced_eos_has_no_o() {
    let (train, test) = data();
    let dir = tempfile::tempdir().unwrap();
    let report = pipeline::run_on_units(&config(vec![3], dir.path()), &train, &test, &Method::ALL).unwrap();

    let probs = fs::read(dir.path().join("seed-3/eval-pcc0.5/probs.tsv")).unwrap();
    assert!(!probs.is_empty());
    for m in Method::ALL {
        let spans = dir.path().join(format!("seed-3/eval-pcc0.5/spans-{m}.jsonl"));
        assert!(spans.exists(), "{}", spans.display());
    }

    for p_cc in [0.5, 0.0] {
        let forced = report.find(p_cc, Method::EosForce, Granularity::Word).unwrap();
        let o = forced.runs[0].report.per_label.get("O").map_or(0.0, |s| s.f1);
        assert_eq!(o, 0.0);
        assert!(report.find(p_cc, Method::BosEos, Granularity::Char).is_some());
    }
    assert!(dir.path().join("report.json").exists());
    assert!(fs::read_to_string(dir.path().join("report.txt")).unwrap().contains("span_f1"));
}

#[test]
fn parallel_seeds_match_sequential_seeds() {
    let (train, test) = data();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut seq = config(vec![1, 2, 3], a.path());
    seq.parallel_seeds = false;
    let mut par = config(vec![1, 2, 3], b.path());
    par.parallel_seeds = true;
    let rs = pipeline::run_on_units(&seq, &train, &test, &[Method::BosEos]).unwrap();
    let rp = pipeline::run_on_units(&par, &train, &test, &[Method::BosEos]).unwrap();
    assert_eq!(rs, rp);
    assert_eq!(files(a.path()), files(b.path()));
    let agg = &rs.settings[0].aggregate;
    assert_eq!(agg.runs, 3);
    assert!(!agg.single_run);
}

#[test]
fn missing_input_is_a_load_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(vec![1], dir.path());
    cfg.paths.train = dir.path().join("nope.conllu");
    cfg.paths.test = dir.path().join("nope.conllu");
    match pipeline::run_pipeline(&cfg) {
        Err(PipelineError::Stage { stage, .. }) => assert_eq!(stage, "load"),
        other => panic!("expected a load failure, got {other:?}"),
    }
}

#[test]
fn config_file_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = data();
    corpus::write_corpus_jsonl(fs::File::create(dir.path().join("train.jsonl")).unwrap(), &train).unwrap();
    corpus::write_corpus_jsonl(fs::File::create(dir.path().join("test.jsonl")).unwrap(), &test).unwrap();
    let toml = r#"
version = 1
seeds = [4]
method = "eos"
granularities = ["word"]

[paths]
train = "train.jsonl"
test = "test.jsonl"
output_dir = "out"

[model]
epochs = 1

[eval]
p_cc = [0.0]
"#;
    let path = dir.path().join("run.toml");
    fs::write(&path, toml).unwrap();
    let cfg = pipeline::load_config(&path).unwrap();
    let report = pipeline::run_pipeline(&cfg).unwrap();
    assert_eq!(report.settings.len(), 1);
    assert!(report.find(0.0, Method::Eos, Granularity::Word).unwrap().aggregate.single_run);
    assert!(dir.path().join("out/report.json").exists());
}

#[test]
fn bad_config_names_the_key() {
    let text = "version = 1\nseeds = [1]\n[paths]\ntrain = \"a\"\ntest = \"b\"\n[interp]\nlambda = 1.5\n";
    let err = PipelineConfig::from_toml(text).unwrap_err().to_string();
    assert!(err.contains("interp.lambda"), "{err}");
    let err = PipelineConfig::from_toml("version = 2\nseeds = [1]\n[paths]\ntrain = \"a\"\ntest = \"b\"\n")
        .unwrap_err()
        .to_string();
    assert!(err.contains("version"), "{err}");
}
