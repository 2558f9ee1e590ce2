use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{FeatureConfig, Featurizer, Side};
use super::{ModelError, ProbMatrix};
use crate::augment::{AugmentConfig, ExampleStream, TrainingExample};
use crate::corpus::Unit;
use crate::exec::{self, Execution};

const MAGIC: &[u8; 8] = b"SIDMODEL";
const FORMAT_VERSION: u32 = 1;
// examples featurized together before their sequential SGD pass
const CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub features: FeatureConfig,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Multiplies the learning rate after every epoch.
    pub lr_decay: f64,
    /// Also train the left-context EOS and right-context BOS heads.
    pub uni: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            features: FeatureConfig::default(),
            epochs: 5,
            learning_rate: 0.2,
            lr_decay: 0.8,
            uni: true,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let f = &self.features;
        if !(1..=28).contains(&f.hash_bits) {
            return Err(ModelError::Config(format!("hash_bits must be in 1..=28, got {}", f.hash_bits)));
        }
        if f.min_ngram == 0 || f.min_ngram > f.max_ngram {
            return Err(ModelError::Config("need 1 <= min_ngram <= max_ngram".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::Config("learning_rate must be positive".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(ModelError::Config("lr_decay must be in (0,1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Head {
    Bos,
    Eos,
    BosUni,
    EosUni,
}

impl Head {
    const ALL: [Head; 4] = [Head::Bos, Head::Eos, Head::BosUni, Head::EosUni];

    fn side(self) -> Side {
        match self {
            Head::Bos | Head::Eos => Side::Both,
            // a BOS decision read right to left, an EOS decision left to right
            Head::BosUni => Side::RightOnly,
            Head::EosUni => Side::LeftOnly,
        }
    }
}

/// Logistic BOS/EOS scorer over hashed features.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    config: ModelConfig,
    heads: [Option<Vec<f64>>; 4],
}

impl ClassifierModel {
    pub fn new(config: ModelConfig) -> Result<ClassifierModel, ModelError> {
        config.validate()?;
        let dim = config.features.dim();
        let uni = config.uni;
        let heads = [
            Some(vec![0.0; dim]),
            Some(vec![0.0; dim]),
            uni.then(|| vec![0.0; dim]),
            uni.then(|| vec![0.0; dim]),
        ];
        Ok(ClassifierModel { config, heads })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn has_uni(&self) -> bool {
        self.heads[2].is_some() && self.heads[3].is_some()
    }

    fn prob(&self, head: usize, feats: &[u32]) -> Option<f64> {
        let w = self.heads[head].as_ref()?;
        Some(sigmoid(feats.iter().map(|&j| w[j as usize]).sum()))
    }

    /// One SGD pass over `examples` in the given order.
    fn sgd(&mut self, examples: &[TrainingExample], lr: f64, execution: Execution) {
        for chunk in examples.chunks(CHUNK) {
            let featurized = exec::map(execution, chunk, |ex| {
                let words = ex.words();
                let f = Featurizer::new(&self.config.features, &words);
                let feats: Vec<[Vec<u32>; 3]> = (0..words.len())
                    .map(|t| {
                        [
                            f.features(t, Side::Both),
                            f.features(t, Side::LeftOnly),
                            f.features(t, Side::RightOnly),
                        ]
                    })
                    .collect();
                (ex.gold(), feats)
            });
            for (gold, feats) in featurized {
                for (t, fs) in feats.iter().enumerate() {
                    for (h, head) in Head::ALL.iter().enumerate() {
                        let x = match head.side() {
                            Side::Both => &fs[0],
                            Side::LeftOnly => &fs[1],
                            Side::RightOnly => &fs[2],
                        };
                        let Some(p) = self.prob(h, x) else { continue };
                        let y = match head {
                            Head::Bos | Head::BosUni => gold.bos[t],
                            Head::Eos | Head::EosUni => gold.eos[t],
                        };
                        let g = lr * (p - f64::from(u8::from(y)));
                        let w = self.heads[h].as_mut().unwrap();
                        for &j in x {
                            w[j as usize] -= g;
                        }
                    }
                }
            }
        }
    }

    pub fn save<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header = serde_json::to_vec(&self.config)?;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(&header)?;
        let mask = self
            .heads
            .iter()
            .enumerate()
            .fold(0u8, |m, (i, h)| m | (u8::from(h.is_some()) << i));
        w.write_all(&[mask])?;
        for weights in self.heads.iter().flatten() {
            let nz: Vec<(u32, f64)> = weights
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i as u32, *v))
                .collect();
            w.write_all(&(nz.len() as u32).to_le_bytes())?;
            for (i, v) in nz {
                w.write_all(&i.to_le_bytes())?;
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load<R: Read>(mut r: R) -> Result<ClassifierModel, ModelError> {
        let bad = |m: &str| ModelError::ModelFile(m.to_string());
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(bad("wrong magic bytes"));
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(ModelError::ModelFile(format!("unsupported version {version}")));
        }
        let len = read_u32(&mut r)? as usize;
        let mut header = vec![0u8; len];
        read_exact(&mut r, &mut header)?;
        let config: ModelConfig =
            serde_json::from_slice(&header).map_err(|e| ModelError::ModelFile(format!("header: {e}")))?;
        config.validate()?;
        let dim = config.features.dim();
        let mut mask = [0u8; 1];
        read_exact(&mut r, &mut mask)?;
        if mask[0] & 0b11 != 0b11 || mask[0] >> 4 != 0 {
            return Err(bad("bidirectional heads missing"));
        }
        let mut heads: [Option<Vec<f64>>; 4] = Default::default();
        for (i, slot) in heads.iter_mut().enumerate() {
            if mask[0] & (1 << i) == 0 {
                continue;
            }
            let mut w = vec![0.0; dim];
            let nnz = read_u32(&mut r)?;
            let mut prev: Option<u32> = None;
            for _ in 0..nnz {
                let j = read_u32(&mut r)?;
                let mut buf = [0u8; 8];
                read_exact(&mut r, &mut buf)?;
                let v = f64::from_le_bytes(buf);
                if j as usize >= dim || prev.is_some_and(|p| p >= j) || !v.is_finite() {
                    return Err(bad("corrupt weight table"));
                }
                prev = Some(j);
                w[j as usize] = v;
            }
            *slot = Some(w);
        }
        if heads[2].is_some() != heads[3].is_some() {
            return Err(bad("only one unidirectional head present"));
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(bad("trailing bytes"));
        }
        Ok(ClassifierModel { config, heads })
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), ModelError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => ModelError::ModelFile("truncated file".into()),
        _ => ModelError::Io(e),
    })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, ModelError> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn shuffle_rng(seed: u64, epoch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // the augmentation stream uses streams 0..epochs
    rng.set_stream(u64::MAX - epoch);
    rng
}

/// Trains on freshly augmented inputs every epoch. The augmentation stream
/// is seeded from `cfg.seed`, not `augment.seed`.
pub fn train(
    units: &[Unit],
    augment: &AugmentConfig,
    cfg: &ModelConfig,
    execution: Execution,
) -> Result<ClassifierModel, ModelError> {
    augment.validate()?;
    let mut model = ClassifierModel::new(cfg.clone())?;
    let aug = AugmentConfig { seed: cfg.seed, ..augment.clone() };
    let mut lr = cfg.learning_rate;
    for epoch in 0..cfg.epochs as u64 {
        let mut examples: Vec<TrainingExample> = ExampleStream::new(units, &aug, epoch).collect();
        examples.shuffle(&mut shuffle_rng(cfg.seed, epoch));
        model.sgd(&examples, lr, execution);
        lr *= cfg.lr_decay;
    }
    Ok(model)
}

/// Trains on a fixed set of examples, reshuffled every epoch.
pub fn train_examples(
    examples: &[TrainingExample],
    cfg: &ModelConfig,
    execution: Execution,
) -> Result<ClassifierModel, ModelError> {
    let mut model = ClassifierModel::new(cfg.clone())?;
    let mut order: Vec<TrainingExample> = examples.to_vec();
    let mut lr = cfg.learning_rate;
    for epoch in 0..cfg.epochs as u64 {
        order.shuffle(&mut shuffle_rng(cfg.seed, epoch));
        model.sgd(&order, lr, execution);
        lr *= cfg.lr_decay;
    }
    Ok(model)
}

pub fn predict<S: AsRef<str>>(model: &ClassifierModel, words: &[S], include_uni: bool) -> Result<ProbMatrix, ModelError> {
    if include_uni && !model.has_uni() {
        return Err(ModelError::MissingUni("the model was trained without unidirectional heads"));
    }
    let f = Featurizer::new(&model.config.features, words);
    let n = words.len();
    let mut cols: [Vec<f64>; 4] = Default::default();
    for t in 0..n {
        let both = f.features(t, Side::Both);
        cols[0].push(model.prob(0, &both).unwrap());
        cols[1].push(model.prob(1, &both).unwrap());
        if include_uni {
            cols[2].push(model.prob(2, &f.features(t, Side::RightOnly)).unwrap());
            cols[3].push(model.prob(3, &f.features(t, Side::LeftOnly)).unwrap());
        }
    }
    let [b, e, bu, eu] = cols;
    if include_uni {
        ProbMatrix::with_uni(b, e, bu, eu)
    } else {
        ProbMatrix::new(b, e)
    }
}

pub fn predict_batch<S: AsRef<str> + Sync>(
    model: &ClassifierModel,
    docs: &[Vec<S>],
    include_uni: bool,
    execution: Execution,
) -> Result<Vec<ProbMatrix>, ModelError> {
    exec::try_map(execution, docs, |words| predict(model, words, include_uni))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn small_cfg(seed: u64) -> ModelConfig {
        ModelConfig {
            features: FeatureConfig { hash_bits: 14, ..Default::default() },
            epochs: 2,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn training_is_deterministic() {
        let units = synth::generate_units(200, 0.25, 1);
        let a = train(&units, &AugmentConfig::default(), &small_cfg(4), Execution::Parallel).unwrap();
        let b = train(&units, &AugmentConfig::default(), &small_cfg(4), Execution::Sequential).unwrap();
        assert_eq!(a, b);
        let c = train(&units, &AugmentConfig::default(), &small_cfg(5), Execution::Sequential).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn save_load_roundtrip() {
        let units = synth::generate_units(50, 0.25, 2);
        let m = train(&units, &AugmentConfig::default(), &small_cfg(1), Execution::Sequential).unwrap();
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let back = ClassifierModel::load(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        let mut again = Vec::new();
        back.save(&mut again).unwrap();
        assert_eq!(buf, again);
        assert!(ClassifierModel::load(&buf[..buf.len() - 3]).is_err());
        let mut corrupt = buf.clone();
        corrupt[0] = b'X';
        assert!(matches!(ClassifierModel::load(corrupt.as_slice()), Err(ModelError::ModelFile(_))));
    }

    #[test]
    fn predictions_are_probabilities() {
        let units = synth::generate_units(100, 0.25, 3);
        let m = train(&units, &AugmentConfig::default(), &small_cfg(2), Execution::Sequential).unwrap();
        let words = ["hello", "there", ".", "how", "are", "you", "?"];
        let p = predict(&m, &words, true).unwrap();
        assert_eq!(p.len(), words.len());
        p.validate().unwrap();
        assert!(predict(&m, &[] as &[&str], true).unwrap().is_empty());
    }

    #[test]
    fn uni_requires_uni_heads() {
        let cfg = ModelConfig { uni: false, ..small_cfg(0) };
        let m = ClassifierModel::new(cfg).unwrap();
        assert!(matches!(predict(&m, &["a"], true), Err(ModelError::MissingUni(_))));
        assert!(!predict(&m, &["a"], false).unwrap().has_uni());
    }

    #[test]
    fn learns_a_separable_pattern() {
        let units = synth::generate_units(400, 0.25, 9);
        let m = train(&units, &AugmentConfig::default(), &small_cfg(3), Execution::Parallel).unwrap();
        let words = ["The", "dog", "bought", "the", "report", ".", "She", "fixed", "a", "car", "."];
        let p = predict(&m, &words, false).unwrap();
        assert!(p.p_eos[5] > 0.5, "{:?}", p.p_eos);
        assert!(p.p_eos[2] < 0.5, "{:?}", p.p_eos);
        assert!(p.p_bos[6] > p.p_bos[7]);
    }
}
