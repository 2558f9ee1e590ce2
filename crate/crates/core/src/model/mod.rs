//! BOS/EOS probability scoring.
//!
//! [`ClassifierModel`] is a hashed-feature logistic scorer with one head per
//! boundary type, plus optional unidirectional heads that see only the left
//! (EOS) or right (BOS) context. Any external scorer can be plugged in through
//! the probability file format in [`probs`].

mod classifier;
pub mod features;
pub mod probs;

pub use classifier::{predict, predict_batch, train, train_examples, ClassifierModel, ModelConfig};
pub use features::{featurize, FeatureConfig, Side};
pub use probs::{load_probs, read_prob_documents, write_probs, ProbDocument};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("line {line}: {column} = {value} is not a probability in [0,1]")]
    ProbOutOfRange { line: usize, column: &'static str, value: f64 },
    #[error("probability vectors have mismatched lengths ({0})")]
    Ragged(String),
    #[error("{column}[{index}] = {value} is not a probability in [0,1]")]
    InvalidProb { column: &'static str, index: usize, value: f64 },
    #[error("unidirectional probabilities requested but {0}")]
    MissingUni(&'static str),
    #[error("interpolation weight must be in [0,1], got {0}")]
    Lambda(f64),
    #[error("invalid model file: {0}")]
    ModelFile(String),
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Augment(#[from] crate::augment::AugmentError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-token BOS/EOS probabilities for one document, optionally with the
/// unidirectional pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbMatrix {
    pub p_bos: Vec<f64>,
    pub p_eos: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_bos_uni: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_eos_uni: Option<Vec<f64>>,
}

impl ProbMatrix {
    pub fn new(p_bos: Vec<f64>, p_eos: Vec<f64>) -> Result<ProbMatrix, ModelError> {
        let m = ProbMatrix {
            p_bos,
            p_eos,
            p_bos_uni: None,
            p_eos_uni: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_uni(
        p_bos: Vec<f64>,
        p_eos: Vec<f64>,
        p_bos_uni: Vec<f64>,
        p_eos_uni: Vec<f64>,
    ) -> Result<ProbMatrix, ModelError> {
        let m = ProbMatrix {
            p_bos,
            p_eos,
            p_bos_uni: Some(p_bos_uni),
            p_eos_uni: Some(p_eos_uni),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.p_bos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_bos.is_empty()
    }

    pub fn has_uni(&self) -> bool {
        self.p_bos_uni.is_some() && self.p_eos_uni.is_some()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.p_bos.len();
        let mut columns: Vec<(&'static str, &Vec<f64>)> = vec![("p_bos", &self.p_bos), ("p_eos", &self.p_eos)];
        if let Some(v) = &self.p_bos_uni {
            columns.push(("p_bos_uni", v));
        }
        if let Some(v) = &self.p_eos_uni {
            columns.push(("p_eos_uni", v));
        }
        if self.p_bos_uni.is_some() != self.p_eos_uni.is_some() {
            return Err(ModelError::Ragged("only one unidirectional column present".into()));
        }
        for (column, v) in columns {
            if v.len() != n {
                return Err(ModelError::Ragged(format!("{column} has {} entries, p_bos has {n}", v.len())));
            }
            if let Some((index, &value)) = v.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
                return Err(ModelError::InvalidProb { column, index, value });
            }
        }
        Ok(())
    }

    /// Contiguous token range `[start, end)` as its own matrix.
    pub fn slice(&self, start: usize, end: usize) -> ProbMatrix {
        ProbMatrix {
            p_bos: self.p_bos[start..end].to_vec(),
            p_eos: self.p_eos[start..end].to_vec(),
            p_bos_uni: self.p_bos_uni.as_ref().map(|v| v[start..end].to_vec()),
            p_eos_uni: self.p_eos_uni.as_ref().map(|v| v[start..end].to_vec()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpConfig {
    /// Weight of the unidirectional probabilities.
    pub lambda: f64,
}

impl Default for InterpConfig {
    fn default() -> Self {
        InterpConfig { lambda: 0.5 }
    }
}

impl InterpConfig {
    pub fn new(lambda: f64) -> Result<InterpConfig, ModelError> {
        let c = InterpConfig { lambda };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if (0.0..=1.0).contains(&self.lambda) {
            Ok(())
        } else {
            Err(ModelError::Lambda(self.lambda))
        }
    }
}

/// `p = λ·p_uni + (1-λ)·p_bi` for both boundary types. The result carries
/// no unidirectional columns.
pub fn interpolate(m: &ProbMatrix, cfg: &InterpConfig) -> Result<ProbMatrix, ModelError> {
    cfg.validate()?;
    let (Some(bos_uni), Some(eos_uni)) = (&m.p_bos_uni, &m.p_eos_uni) else {
        return Err(ModelError::MissingUni("the matrix has no unidirectional columns"));
    };
    let l = cfg.lambda;
    let mix = |bi: &[f64], uni: &[f64]| -> Vec<f64> {
        bi.iter()
            .zip(uni)
            // keep results inside [0,1] despite rounding
            .map(|(&b, &u)| (l * u + (1.0 - l) * b).clamp(0.0, 1.0))
            .collect()
    };
    ProbMatrix::new(mix(&m.p_bos, bos_uni), mix(&m.p_eos, eos_uni))
}
