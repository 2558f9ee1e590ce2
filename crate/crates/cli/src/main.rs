//! `sentid` command-line tool.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 internal error.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sentid::augment::{self, AugmentConfig, DocumentRecord, ExampleRecord, ExampleStream, TrainingExample};
use sentid::corpus::{self, RelationRuleSet, Unit};
use sentid::decode::{self, Method};
use sentid::eval::{self, EvalReport};
use sentid::exec::Execution;
use sentid::labels::Granularity;
use sentid::model::{self, ClassifierModel, InterpConfig, ModelConfig};
use sentid::pipeline::{self, PipelineConfig};

#[derive(Parser)]
#[command(name = "sentid", version, about = "Sentence identification in noisy text")]
struct Cli {
    /// Random seed (overrides the config; for `pipeline`, runs only this seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML experiment config whose module sections supply defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for outputs not given an explicit path.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Disable multi-threaded batch processing.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert CoNLL-U treebanks into an SU/NSU unit corpus (JSONL).
    Convert(ConvertArgs),
    /// Train the BOS/EOS classifier on a unit corpus.
    Train(TrainArgs),
    /// Write BOS/EOS probabilities for documents.
    Predict(PredictArgs),
    /// Decode probability files into SU spans.
    Decode(DecodeArgs),
    /// Emit augmented training examples.
    Augment(AugmentArgs),
    /// Score predicted spans against gold documents.
    Evaluate(EvaluateArgs),
    /// Run the multi-seed experiment described by --config.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct ConvertArgs {
    /// CoNLL-U file or directory of CoNLL-U files.
    #[arg(long)]
    input: PathBuf,
    /// Relation rules as JSON, or `default`.
    #[arg(long, default_value = "default")]
    rules: String,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write unit and label counts as JSON.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Unit corpus (JSONL) or CoNLL-U input.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Context window radius in tokens.
    #[arg(long)]
    window: Option<usize>,
    /// Also train unidirectional heads.
    #[arg(long)]
    uni: bool,
    #[arg(long)]
    hash_bits: Option<u32>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[command(flatten)]
    aug: AugmentFlags,
}

#[derive(Args)]
struct AugmentFlags {
    /// Concatenation probability.
    #[arg(long)]
    pcc: Option<f64>,
    /// Unit-level augmentation probability.
    #[arg(long)]
    pda: Option<f64>,
    /// Edge truncation probability.
    #[arg(long)]
    ptr: Option<f64>,
    #[arg(long)]
    max_tokens: Option<usize>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Documents, examples or units (JSONL).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Leave out the unidirectional columns.
    #[arg(long)]
    no_uni: bool,
}

#[derive(Args)]
struct DecodeArgs {
    /// Probability file, or `-` for stdin.
    #[arg(long)]
    probs: String,
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    /// Candidate threshold c.
    #[arg(long)]
    threshold: Option<f64>,
    /// Unidirectional interpolation weight.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    aug: AugmentFlags,
    /// Number of examples; defaults to one pass over the corpus.
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Examples)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    /// Words with gold BOS/EOS indices.
    Examples,
    /// Full units, needed for character-level scoring.
    Documents,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Gold documents or examples (JSONL).
    #[arg(long, required_unless_present = "aggregate")]
    gold: Option<PathBuf>,
    /// Predicted spans (JSONL), one line per gold document.
    #[arg(long, required_unless_present = "aggregate")]
    pred: Option<PathBuf>,
    #[arg(long, value_parser = parse_granularity, default_value = "word")]
    granularity: Granularity,
    /// Aggregate the JSON reports found in this directory instead.
    #[arg(long, conflicts_with_all = ["gold", "pred"])]
    aggregate: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    /// Decoding methods to compare (default: the config's method).
    #[arg(long, value_parser = parse_method, value_delimiter = ',')]
    method: Vec<Method>,
    /// Run seeds concurrently.
    #[arg(long)]
    parallel_seeds: bool,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: decode::DecodeError| e.to_string())
}

fn parse_granularity(s: &str) -> Result<Granularity, String> {
    match Granularity::parse(s) {
        Some(g @ (Granularity::Word | Granularity::Char)) => Ok(g),
        _ => Err(format!("unsupported granularity {s:?} (expected word or char)")),
    }
}

/// Error classes mapped onto exit codes.
enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
        }
    }
}

trait OrFail<T> {
    fn usage(self) -> Result<T, Failure>;
    fn data(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> OrFail<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }

    fn data(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Data(e.into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            let code = f.code();
            let (Failure::Usage(e) | Failure::Data(e)) = f;
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
        Err(_) => ExitCode::from(3),
    }
}

struct Ctx {
    seed: Option<u64>,
    config: Option<PipelineConfig>,
    output_dir: Option<PathBuf>,
    exec: Execution,
}

impl Ctx {
    /// Explicit path, else `<output-dir>/<default_name>`, else stdout.
    fn out_path(&self, explicit: Option<PathBuf>, default_name: &str) -> Result<Option<PathBuf>, Failure> {
        if let Some(p) = explicit {
            return Ok(Some(p));
        }
        match &self.output_dir {
            Some(dir) => {
                fs::create_dir_all(dir)
                    .with_context(|| format!("creating {}", dir.display()))
                    .data()?;
                Ok(Some(dir.join(default_name)))
            }
            None => Ok(None),
        }
    }

    fn augment_config(&self, flags: &AugmentFlags) -> Result<AugmentConfig, Failure> {
        let mut cfg = self.config.as_ref().map(|c| c.augment.clone()).unwrap_or_default();
        if let Some(p) = flags.pcc {
            cfg.p_cc = p;
        }
        if let Some(p) = flags.pda {
            cfg.p_da = p;
        }
        if let Some(p) = flags.ptr {
            cfg.p_tr = p;
        }
        if let Some(m) = flags.max_tokens {
            cfg.max_tokens = m;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate().usage()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = match (&cli.config, &cli.command) {
        (Some(path), _) => Some(pipeline::load_config(path).usage()?),
        (None, Command::Pipeline(_)) => {
            return Err(Failure::Usage(anyhow!("pipeline needs --config <file>")));
        }
        (None, _) => None,
    };
    let ctx = Ctx {
        seed: cli.seed,
        config,
        output_dir: cli.output_dir,
        exec: if cli.sequential { Execution::Sequential } else { Execution::Parallel },
    };
    match cli.command {
        Command::Convert(a) => convert(&ctx, a),
        Command::Train(a) => train(&ctx, a),
        Command::Predict(a) => predict(&ctx, a),
        Command::Decode(a) => decode_cmd(&ctx, a),
        Command::Augment(a) => augment_cmd(&ctx, a),
        Command::Evaluate(a) => evaluate(&ctx, a),
        Command::Pipeline(a) => run_pipeline(ctx, a),
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("cannot open {}", path.display()))
        .data()
}

/// Runs `f` against the file at `path`, or stdout when `path` is `None`.
fn write_to<F>(path: Option<&Path>, f: F) -> Result<(), Failure>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let result = match path {
        Some(p) => {
            let file = File::create(p).with_context(|| format!("cannot create {}", p.display())).data()?;
            let mut w = BufWriter::new(file);
            f(&mut w).and_then(|_| w.flush())
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            f(&mut w).and_then(|_| w.flush())
        }
    };
    result.context("write failed").data()
}

fn convert(ctx: &Ctx, a: ConvertArgs) -> Result<(), Failure> {
    let rules = if a.rules == "default" {
        ctx.config.as_ref().map(|c| c.rules.clone()).unwrap_or_default()
    } else {
        RelationRuleSet::from_json(open(Path::new(&a.rules))?).usage()?
    };
    let corpus = corpus::load_corpus(&a.input, &rules)
        .with_context(|| format!("converting {}", a.input.display()))
        .data()?;
    let out = ctx.out_path(a.output, "corpus.jsonl")?;
    write_to(out.as_deref(), |w| corpus::write_corpus_jsonl(w, &corpus.units))?;
    if let Some(p) = a.stats {
        let stats = corpus::compute_stats(&corpus);
        let json = serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n";
        fs::write(&p, json).with_context(|| format!("cannot write {}", p.display())).data()?;
    }
    eprintln!("{} units from {}", corpus.len(), a.input.display());
    Ok(())
}

fn read_units(path: &Path, ctx: &Ctx) -> Result<Vec<Unit>, Failure> {
    let rules = ctx.config.as_ref().map(|c| c.rules.clone()).unwrap_or_default();
    let corpus = corpus::load_corpus(path, &rules)
        .with_context(|| format!("reading {}", path.display()))
        .data()?;
    Ok(corpus.units)
}

fn train(ctx: &Ctx, a: TrainArgs) -> Result<(), Failure> {
    let mut cfg: ModelConfig = ctx.config.as_ref().map(|c| c.model.clone()).unwrap_or_else(|| ModelConfig {
        uni: false,
        ..ModelConfig::default()
    });
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(w) = a.window {
        cfg.features.window = w;
    }
    if let Some(b) = a.hash_bits {
        cfg.features.hash_bits = b;
    }
    if let Some(lr) = a.learning_rate {
        cfg.learning_rate = lr;
    }
    cfg.uni |= a.uni;
    cfg.seed = ctx.seed.unwrap_or(cfg.seed);
    cfg.validate().usage()?;
    let aug = ctx.augment_config(&a.aug)?;
    let out = ctx
        .out_path(a.out, "model.bin")?
        .ok_or_else(|| Failure::Usage(anyhow!("train needs --out or --output-dir")))?;

    let units = read_units(&a.corpus, ctx)?;
    let model = model::train(&units, &aug, &cfg, ctx.exec).data()?;
    write_to(Some(&out), |w| model.save(w))?;
    eprintln!("trained on {} units, model written to {}", units.len(), out.display());
    Ok(())
}

/// Reads documents in any of the JSONL shapes: `{"units": ...}` documents,
/// `{"words", "bos", "eos"}` examples, or single units.
fn read_documents(path: &Path) -> Result<Vec<TrainingExample>, Failure> {
    let mut docs = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display())).data()?;
        if line.trim().is_empty() {
            continue;
        }
        let at = || format!("{}:{}", path.display(), i + 1);
        let value: serde_json::Value = serde_json::from_str(&line).with_context(at).data()?;
        let doc = if value.get("units").is_some() {
            serde_json::from_value::<DocumentRecord>(value).with_context(at).data()?.into_example()
        } else if value.get("bos").is_some() {
            let rec: ExampleRecord = serde_json::from_value(value).with_context(at).data()?;
            example_from_record(rec).with_context(at).data()?
        } else {
            let unit: Unit = serde_json::from_value(value).with_context(at).data()?;
            unit.validate().with_context(at).data()?;
            DocumentRecord { units: vec![unit], provenance: Vec::new() }.into_example()
        };
        docs.push(doc);
    }
    Ok(docs)
}

/// Rebuilds units from gold indices: each gold span is an SU, each run of
/// words outside spans an NSU. Words are separated by single spaces.
fn example_from_record(rec: ExampleRecord) -> anyhow::Result<TrainingExample> {
    let n = rec.words.len();
    if rec.bos.iter().chain(&rec.eos).any(|&i| i >= n) {
        bail!("boundary index out of range for {n} words");
    }
    let b = sentid::BoundarySeq::from_indices(n, &rec.bos, &rec.eos);
    let labels = sentid::labels::boundaries_to_bio(&b, Granularity::Word)?;
    let mut units = Vec::new();
    let mut start = 0;
    let flush_o = |units: &mut Vec<Unit>, s: usize, e: usize| {
        if s < e {
            units.push(Unit::from_words(&rec.words[s..e], false));
        }
    };
    for (s, e) in labels.spans() {
        flush_o(&mut units, start, s);
        units.push(Unit::from_words(&rec.words[s..e], true));
        start = e;
    }
    flush_o(&mut units, start, n);
    Ok(DocumentRecord { units, provenance: Vec::new() }.into_example())
}

fn predict(ctx: &Ctx, a: PredictArgs) -> Result<(), Failure> {
    let model = ClassifierModel::load(open(&a.model)?)
        .with_context(|| format!("loading {}", a.model.display()))
        .data()?;
    let docs = read_documents(&a.input)?;
    let words: Vec<Vec<String>> = docs.iter().map(TrainingExample::words).collect();
    let uni = model.has_uni() && !a.no_uni;
    let probs = model::predict_batch(&model, &words, uni, ctx.exec).data()?;
    let out = ctx.out_path(a.out, "probs.tsv")?;
    write_to(out.as_deref(), |w| {
        for (ws, p) in words.iter().zip(&probs) {
            model::write_probs(&mut *w, ws, p)?;
        }
        Ok(())
    })
}

fn decode_cmd(ctx: &Ctx, a: DecodeArgs) -> Result<(), Failure> {
    let mut dcfg = ctx.config.as_ref().map(|c| c.decoder).unwrap_or_default();
    if let Some(c) = a.threshold {
        dcfg.candidate_threshold = c;
    }
    dcfg.validate().usage()?;
    let mut icfg = ctx.config.as_ref().map(|c| c.interp).unwrap_or_default();
    if let Some(l) = a.lambda {
        icfg = InterpConfig::new(l).usage()?;
    }
    let method = a.method.or(ctx.config.as_ref().map(|c| c.method)).unwrap_or_default();

    let docs = if a.probs == "-" {
        let mut text = String::new();
        io::stdin().read_to_string(&mut text).context("reading stdin").data()?;
        model::read_prob_documents(text.as_bytes())
    } else {
        model::read_prob_documents(open(Path::new(&a.probs))?)
    }
    .with_context(|| format!("reading {}", a.probs))
    .data()?;

    let mut matrices = Vec::with_capacity(docs.len());
    for d in docs {
        if d.probs.has_uni() {
            matrices.push(model::interpolate(&d.probs, &icfg).data()?);
        } else if a.lambda.is_some() {
            return Err(Failure::Data(anyhow!("--lambda given but {} has no unidirectional columns", a.probs)));
        } else {
            matrices.push(d.probs);
        }
    }
    let spans = decode::decode_batch(&matrices, method, &dcfg, ctx.exec);
    let out = ctx.out_path(a.out, "spans.jsonl")?;
    write_to(out.as_deref(), |w| decode::write_spans_jsonl(w, &spans))
}

fn augment_cmd(ctx: &Ctx, a: AugmentArgs) -> Result<(), Failure> {
    let cfg = ctx.augment_config(&a.aug)?;
    let units = read_units(&a.corpus, ctx)?;
    if units.is_empty() && a.count.is_some_and(|c| c > 0) {
        return Err(Failure::Data(anyhow!("{} holds no units", a.corpus.display())));
    }
    let mut examples: Vec<TrainingExample> = Vec::new();
    match a.count {
        None => examples.extend(ExampleStream::new(&units, &cfg, 0)),
        Some(count) => {
            // later passes use fresh epochs of the same seed
            let mut epoch = 0;
            while examples.len() < count {
                let before = examples.len();
                examples.extend(ExampleStream::new(&units, &cfg, epoch).take(count - before));
                epoch += 1;
            }
        }
    }
    let out = ctx.out_path(a.out, "examples.jsonl")?;
    write_to(out.as_deref(), |w| match a.format {
        Format::Examples => augment::write_examples_jsonl(w, &examples),
        Format::Documents => augment::write_documents_jsonl(w, &examples),
    })
}

fn evaluate(ctx: &Ctx, a: EvaluateArgs) -> Result<(), Failure> {
    let out = ctx.out_path(a.out, "report.json")?;
    let (json, table) = if let Some(dir) = &a.aggregate {
        let mut files: Vec<PathBuf> = fs::read_dir(dir)
            .with_context(|| format!("reading {}", dir.display()))
            .data()?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        files.sort();
        let mut reports = Vec::new();
        for f in &files {
            let r: EvalReport = serde_json::from_reader(open(f)?)
                .with_context(|| format!("{} is not an evaluation report", f.display()))
                .data()?;
            reports.push(r);
        }
        let agg = eval::aggregate(&reports).with_context(|| format!("aggregating {}", dir.display())).data()?;
        (serde_json::to_string_pretty(&agg), agg.render_table())
    } else {
        let gold = read_documents(a.gold.as_deref().expect("required by clap"))?;
        let pred_path = a.pred.as_deref().expect("required by clap");
        let preds = decode::read_spans_jsonl(open(pred_path)?)
            .with_context(|| format!("reading {}", pred_path.display()))
            .data()?;
        let report = eval::evaluate_documents(&gold, &preds, a.granularity, ctx.exec).data()?;
        (serde_json::to_string_pretty(&report), report.render_table())
    };
    let json = json.expect("reports serialize") + "\n";
    let to_stdout = out.is_none();
    write_to(out.as_deref(), |w| w.write_all(json.as_bytes()))?;
    if to_stdout {
        eprint!("{table}");
    } else {
        print!("{table}");
    }
    Ok(())
}

fn run_pipeline(ctx: Ctx, a: PipelineArgs) -> Result<(), Failure> {
    let mut cfg = ctx.config.expect("checked in run");
    if let Some(s) = ctx.seed {
        cfg.seeds = vec![s];
    }
    if let Some(d) = ctx.output_dir {
        cfg.paths.output_dir = Some(d);
    }
    cfg.parallel_seeds |= a.parallel_seeds;
    let methods = if a.method.is_empty() { vec![cfg.method] } else { a.method };
    let report = pipeline::run_pipeline_methods(&cfg, &methods).map_err(|e| match e {
        pipeline::PipelineError::Config(_) => Failure::Usage(e.into()),
        other => Failure::Data(other.into()),
    })?;
    print!("{}", report.render_table());
    if cfg.paths.output_dir.is_none() {
        // without an output directory the JSON report goes to stdout too
        print!("{}", report.to_json());
    }
    Ok(())
}
