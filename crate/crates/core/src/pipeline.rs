//! Multi-seed experiments: train, build evaluation inputs, predict, decode
//! and evaluate, then aggregate across seeds.
//!
//! Configuration is a versioned TOML file:
//!
//! ```toml
//! version = 1
//! seeds = [1, 2, 3, 4, 5]
//! method = "bos_eos"
//!
//! [paths]
//! train = "data/en_ewt-ud-train.conllu"
//! test = "data/en_ewt-ud-test.conllu"
//! output_dir = "runs/ewt"
//!
//! [augment]
//! p_cc = 0.5
//!
//! [eval]
//! p_cc = [0.5, 0.0]
//! ```
//!
//! Every section other than `paths` and `seeds` is optional.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{self, AugmentConfig, TrainingExample};
use crate::corpus::{self, RelationRuleSet, Unit};
use crate::decode::{self, DecoderConfig, Method, SpanResult};
use crate::eval::{self, AggregateReport, EvalReport};
use crate::exec::{self, Execution};
use crate::labels::Granularity;
use crate::model::{self, ClassifierModel, InterpConfig, ModelConfig, ProbMatrix};

pub const CONFIG_VERSION: u32 = 1;

type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: BoxError,
    },
}

fn stage<E: Into<BoxError>>(stage: &'static str) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::Stage { stage, source: e.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// CoNLL-U file, directory of CoNLL-U files, or JSONL corpus.
    pub train: PathBuf,
    pub test: PathBuf,
    /// Relation rules as JSON; overrides the `[rules]` table.
    #[serde(default)]
    pub rules: Option<PathBuf>,
    /// Where per-stage artifacts and the final report are written.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    /// Concatenation probabilities used to build evaluation inputs.
    pub p_cc: Vec<f64>,
    pub max_tokens: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            p_cc: vec![0.5, 0.0],
            max_tokens: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_granularities")]
    pub granularities: Vec<Granularity>,
    pub paths: Paths,
    #[serde(default)]
    pub rules: RelationRuleSet,
    #[serde(default)]
    pub augment: AugmentConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub interp: InterpConfig,
    #[serde(default)]
    pub decoder: DecoderConfig,
    #[serde(default)]
    pub eval: EvalSettings,
    /// Run seeds concurrently.
    #[serde(default)]
    pub parallel_seeds: bool,
}

fn default_granularities() -> Vec<Granularity> {
    vec![Granularity::Word, Granularity::Char]
}

impl PipelineConfig {
    /// Defaults for everything but the required fields.
    pub fn new(seeds: Vec<u64>, train: PathBuf, test: PathBuf) -> PipelineConfig {
        PipelineConfig {
            version: CONFIG_VERSION,
            seeds,
            method: Method::default(),
            granularities: default_granularities(),
            paths: Paths {
                train,
                test,
                rules: None,
                output_dir: None,
            },
            rules: RelationRuleSet::default(),
            augment: AugmentConfig::default(),
            model: ModelConfig::default(),
            interp: InterpConfig::default(),
            decoder: DecoderConfig::default(),
            eval: EvalSettings::default(),
            parallel_seeds: false,
        }
    }

    pub fn from_toml(text: &str) -> Result<PipelineConfig, PipelineError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks ranges; errors name the offending key.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let err = |key: &str, e: &dyn std::fmt::Display| Err(PipelineError::Config(format!("{key}: {e}")));
        if self.version != CONFIG_VERSION {
            return err("version", &format!("unsupported version {}, expected {CONFIG_VERSION}", self.version));
        }
        if self.seeds.is_empty() {
            return err("seeds", &"at least one seed is required");
        }
        if self.granularities.is_empty() {
            return err("granularities", &"at least one granularity is required");
        }
        if self.granularities.contains(&Granularity::Subword) {
            return err("granularities", &"subword evaluation is not supported");
        }
        if let Err(e) = self.augment.validate() {
            return err("augment", &e);
        }
        if let Err(e) = self.model.validate() {
            return err("model", &e);
        }
        if let Err(e) = self.interp.validate() {
            return err("interp.lambda", &e);
        }
        if let Err(e) = self.decoder.validate() {
            return err("decoder", &e);
        }
        if self.eval.p_cc.is_empty() {
            return err("eval.p_cc", &"at least one value is required");
        }
        if let Some(p) = self.eval.p_cc.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return err("eval.p_cc", &format!("{p} is not in [0,1]"));
        }
        if self.eval.max_tokens == 0 {
            return err("eval.max_tokens", &"must be positive");
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<PipelineConfig, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = PipelineConfig::from_toml(&text)?;
    // relative paths are relative to the config file
    if let Some(dir) = path.parent() {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut cfg.paths.train);
        fix(&mut cfg.paths.test);
        if let Some(p) = cfg.paths.rules.as_mut() {
            fix(p);
        }
        if let Some(p) = cfg.paths.output_dir.as_mut() {
            fix(p);
        }
    }
    Ok(cfg)
}

/// Scores of one seed for one setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub report: EvalReport,
}

/// One (evaluation p_cc, method, granularity) combination across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingReport {
    pub eval_p_cc: f64,
    pub method: Method,
    pub granularity: Granularity,
    pub runs: Vec<RunReport>,
    pub aggregate: AggregateReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub seeds: Vec<u64>,
    pub settings: Vec<SettingReport>,
}

impl PipelineReport {
    pub fn find(&self, eval_p_cc: f64, method: Method, granularity: Granularity) -> Option<&SettingReport> {
        self.settings
            .iter()
            .find(|s| s.eval_p_cc == eval_p_cc && s.method == method && s.granularity == granularity)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Mean ± std of the headline metrics, one row per setting.
    pub fn render_table(&self) -> String {
        const COLS: [&str; 6] = ["B_f1", "I_f1", "O_f1", "macro_f1", "weighted_f1", "span_f1"];
        let mut out = String::new();
        let _ = write!(out, "{:<6} {:<10} {:<5}", "p_cc", "method", "level");
        for c in COLS {
            let _ = write!(out, " {c:>17}");
        }
        out.push('\n');
        for s in &self.settings {
            let _ = write!(out, "{:<6} {:<10} {:<5}", s.eval_p_cc, s.method.as_str(), s.granularity.as_str());
            for c in COLS {
                match s.aggregate.metrics.get(c) {
                    Some(m) if s.aggregate.single_run => {
                        let _ = write!(out, " {:>17.4}", m.mean);
                    }
                    Some(m) => {
                        let _ = write!(out, " {:>8.4} ± {:<6.4}", m.mean, m.std);
                    }
                    None => {
                        let _ = write!(out, " {:>17}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Loads data from the configured paths and runs the configured method.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport, PipelineError> {
    run_pipeline_methods(cfg, &[cfg.method])
}

/// Like [`run_pipeline`] but decodes with several methods from the same
/// trained models and probabilities.
pub fn run_pipeline_methods(cfg: &PipelineConfig, methods: &[Method]) -> Result<PipelineReport, PipelineError> {
    cfg.validate()?;
    let rules = match &cfg.paths.rules {
        Some(p) => {
            let f = fs::File::open(p).map_err(stage("load"))?;
            RelationRuleSet::from_json(f).map_err(stage("load"))?
        }
        None => cfg.rules.clone(),
    };
    for p in [&cfg.paths.train, &cfg.paths.test] {
        if !p.exists() {
            return Err(stage("load")(format!("{} does not exist", p.display())));
        }
    }
    let train = corpus::load_corpus(&cfg.paths.train, &rules).map_err(stage("load"))?;
    let test = corpus::load_corpus(&cfg.paths.test, &rules).map_err(stage("load"))?;
    run_on_units(cfg, &train.units, &test.units, methods)
}

/// The experiment loop over in-memory corpora; `cfg.paths` is used only
/// for `output_dir`.
pub fn run_on_units(
    cfg: &PipelineConfig,
    train: &[Unit],
    test: &[Unit],
    methods: &[Method],
) -> Result<PipelineReport, PipelineError> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(PipelineError::Config("no decoding method selected".into()));
    }
    if let Some(dir) = &cfg.paths.output_dir {
        fs::create_dir_all(dir).map_err(stage("output"))?;
    }
    let seed_exec = if cfg.parallel_seeds { Execution::Parallel } else { Execution::Sequential };
    let per_seed = exec::try_map(seed_exec, &cfg.seeds, |&seed| run_seed(cfg, train, test, methods, seed))?;

    let mut settings = Vec::new();
    for (pi, &p_cc) in cfg.eval.p_cc.iter().enumerate() {
        for (mi, &method) in methods.iter().enumerate() {
            for (gi, &granularity) in cfg.granularities.iter().enumerate() {
                let runs: Vec<RunReport> = cfg
                    .seeds
                    .iter()
                    .zip(&per_seed)
                    .map(|(&seed, r)| RunReport { seed, report: r[pi][mi][gi].clone() })
                    .collect();
                let reports: Vec<EvalReport> = runs.iter().map(|r| r.report.clone()).collect();
                let aggregate = eval::aggregate(&reports).map_err(stage("aggregate"))?;
                settings.push(SettingReport { eval_p_cc: p_cc, method, granularity, runs, aggregate });
            }
        }
    }
    let report = PipelineReport { seeds: cfg.seeds.clone(), settings };
    if let Some(dir) = &cfg.paths.output_dir {
        fs::write(dir.join("report.json"), report.to_json()).map_err(stage("output"))?;
        fs::write(dir.join("report.txt"), report.render_table()).map_err(stage("output"))?;
    }
    Ok(report)
}

// reports indexed [p_cc][method][granularity]
type SeedReports = Vec<Vec<Vec<EvalReport>>>;

fn run_seed(
    cfg: &PipelineConfig,
    train: &[Unit],
    test: &[Unit],
    methods: &[Method],
    seed: u64,
) -> Result<SeedReports, PipelineError> {
    let dir = cfg.paths.output_dir.as_ref().map(|d| d.join(format!("seed-{seed}")));
    if let Some(d) = &dir {
        fs::create_dir_all(d).map_err(stage("output"))?;
    }
    let model_cfg = ModelConfig { seed, ..cfg.model.clone() };
    let model = model::train(train, &cfg.augment, &model_cfg, Execution::Parallel).map_err(stage("train"))?;
    if let Some(d) = &dir {
        write_with(&d.join("model.bin"), |w| model.save(w)).map_err(stage("train"))?;
    }

    let mut out = Vec::new();
    for &p_cc in &cfg.eval.p_cc {
        let docs = augment::build_documents(test, p_cc, cfg.eval.max_tokens, seed);
        let probs = predict_documents(&model, &docs, &cfg.interp).map_err(stage("predict"))?;
        let sub = dir.as_ref().map(|d| d.join(format!("eval-pcc{p_cc}")));
        if let Some(s) = &sub {
            fs::create_dir_all(s).map_err(stage("output"))?;
            write_with(&s.join("documents.jsonl"), |w| augment::write_documents_jsonl(w, &docs))
                .map_err(stage("build"))?;
            write_with(&s.join("probs.tsv"), |mut w| {
                for (d, p) in docs.iter().zip(&probs) {
                    model::write_probs(&mut w, &d.words(), p)?;
                }
                Ok(())
            })
            .map_err(stage("predict"))?;
        }
        let mut per_method = Vec::new();
        for &method in methods {
            let spans = decode::decode_batch(&probs, method, &cfg.decoder, Execution::Parallel);
            if let Some(s) = &sub {
                write_with(&s.join(format!("spans-{method}.jsonl")), |w| decode::write_spans_jsonl(w, &spans))
                    .map_err(stage("decode"))?;
            }
            let mut per_gran = Vec::new();
            for &g in &cfg.granularities {
                let r = evaluate(&docs, &spans, g).map_err(stage("evaluate"))?;
                if let Some(s) = &sub {
                    let json = serde_json::to_string_pretty(&r).expect("report serializes") + "\n";
                    fs::write(s.join(format!("report-{method}-{g}.json")), json).map_err(stage("output"))?;
                }
                per_gran.push(r);
            }
            per_method.push(per_gran);
        }
        out.push(per_method);
    }
    Ok(out)
}

/// Model probabilities per document, interpolated when the model has
/// unidirectional heads.
pub fn predict_documents(
    model: &ClassifierModel,
    docs: &[TrainingExample],
    interp: &InterpConfig,
) -> Result<Vec<ProbMatrix>, model::ModelError> {
    let words: Vec<Vec<String>> = docs.iter().map(TrainingExample::words).collect();
    let uni = model.has_uni();
    let probs = model::predict_batch(model, &words, uni, Execution::Parallel)?;
    if !uni {
        return Ok(probs);
    }
    exec::try_map(Execution::Parallel, &probs, |p| model::interpolate(p, interp))
}

fn evaluate(docs: &[TrainingExample], spans: &[SpanResult], g: Granularity) -> Result<EvalReport, eval::EvalError> {
    eval::evaluate_documents(docs, spans, g, Execution::Parallel)
}

fn write_with<F>(path: &Path, f: F) -> std::io::Result<()>
where
    F: FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
{
    let mut w = BufWriter::new(fs::File::create(path)?);
    f(&mut w)?;
    use std::io::Write;
    w.flush()
}

/// Metric means keyed `"<p_cc>/<method>/<level>/<metric>"`, handy for
/// comparisons in tests and scripts.
pub fn summary(report: &PipelineReport) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for s in &report.settings {
        for (k, v) in &s.aggregate.metrics {
            out.insert(format!("{}/{}/{}/{k}", s.eval_p_cc, s.method, s.granularity), v.mean);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
version = 1
seeds = [7]
[paths]
train = "train.jsonl"
test = "test.jsonl"
"#;

    #[test]
    fn minimal_config_defaults() {
        let cfg = PipelineConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.augment.p_cc, 0.5);
        assert_eq!(cfg.augment.p_da, 0.3);
        assert_eq!(cfg.augment.p_tr, 0.1);
        assert_eq!(cfg.interp.lambda, 0.5);
        assert_eq!(cfg.decoder.candidate_threshold, 0.1);
        assert_eq!(cfg.eval.p_cc, vec![0.5, 0.0]);
        assert_eq!(cfg.method, Method::BosEos);
    }

    #[test]
    fn rejects_bad_configs() {
        let lambda = format!("{MINIMAL}[interp]\nlambda = 1.5\n");
        match PipelineConfig::from_toml(&lambda) {
            Err(PipelineError::Config(msg)) => assert!(msg.starts_with("interp.lambda"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let no_seeds = MINIMAL.replace("seeds = [7]\n", "");
        assert!(matches!(PipelineConfig::from_toml(&no_seeds), Err(PipelineError::Config(m)) if m.contains("seeds")));
        let unknown = format!("{MINIMAL}[decoder]\nthreshold = 0.2\n");
        assert!(matches!(PipelineConfig::from_toml(&unknown), Err(PipelineError::Config(m)) if m.contains("threshold")));
        let version = MINIMAL.replace("version = 1", "version = 2");
        assert!(PipelineConfig::from_toml(&version).is_err());
        let empty = MINIMAL.replace("[7]", "[]");
        assert!(PipelineConfig::from_toml(&empty).is_err());
    }

    #[test]
    fn method_names_in_config() {
        for (name, m) in [("eos", Method::Eos), ("eos_force", Method::EosForce), ("bosEos", Method::BosEos)] {
            let cfg = PipelineConfig::from_toml(&MINIMAL.replace("seeds", &format!("method = \"{name}\"\nseeds"))).unwrap();
            assert_eq!(cfg.method, m);
        }
    }
}
