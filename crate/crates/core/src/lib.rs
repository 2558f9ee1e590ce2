//! Sentence identification toolkit.
//!
//! Extracts sentential-unit (SU) spans from noisy text by combining per-token
//! begin-of-sentence (BOS) and end-of-sentence (EOS) probabilities in a
//! dynamic program, while leaving non-sentential units (NSUs) such as
//! metadata, timestamps and fragments outside every span.
//!
//! The crate is organised as a pipeline:
//!
//! * [`corpus`] reads CoNLL-U treebanks and classifies each sentence as SU or
//!   NSU from its dependency relations.
//! * [`labels`] assigns gold BIO labels and converts them between character,
//!   word and subword granularity, and to BOS/EOS flags.
//! * [`augment`] builds model inputs by unit concatenation, casing and
//!   punctuation augmentation, and edge truncation.
//! * [`model`] is a hashed-feature logistic BOS/EOS scorer, the probability
//!   file format, and uni/bidirectional interpolation.
//! * [`decode`] holds the EOS-only baselines and the BOS&EOS decoder.
//! * [`eval`] scores predictions with per-label, macro/weighted and exact span F1.
//! * [`pipeline`] ties the stages together for multi-seed experiments.
//!
//! With the default `parallel` feature, batch entry points run on rayon;
//! without it they fall back to plain iteration. See [`exec::Execution`].

pub mod augment;
pub mod corpus;
pub mod decode;
pub mod eval;
pub mod exec;
pub mod labels;
pub mod model;
pub mod pipeline;
pub mod synth;

pub use augment::{AugmentConfig, TrainingExample};
pub use corpus::{ConlluSentence, Corpus, CorpusStats, RelationRuleSet, Split, Unit};
pub use decode::{DecoderConfig, Method, SpanResult};
pub use eval::{AggregateReport, EvalReport};
pub use exec::Execution;
pub use labels::{BoundarySeq, Granularity, Label, LabelSeq};
pub use model::{ClassifierModel, InterpConfig, ProbMatrix};
