//! Hashed sparse features over a token window.

use serde::{Deserialize, Serialize};

/// Which neighbours a feature vector may look at. Unidirectional scorers
/// see only one side of the token being scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Both,
    LeftOnly,
    RightOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// Tokens considered on each side of the scored token.
    pub window: usize,
    pub min_ngram: usize,
    pub max_ngram: usize,
    /// Weight vectors have `2^hash_bits` entries.
    pub hash_bits: u32,
    pub punct: String,
    pub end_punct: String,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            window: 5,
            min_ngram: 1,
            max_ngram: 4,
            hash_bits: 18,
            punct: ".?!\")'".to_string(),
            end_punct: ".?!".to_string(),
        }
    }
}

impl FeatureConfig {
    pub fn dim(&self) -> usize {
        1 << self.hash_bits
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(parts: &[&[u8]]) -> u64 {
    let mut h = FNV_OFFSET;
    for part in parts {
        for &b in *part {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
        h ^= 0xff;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

// splitmix64 finaliser; spreads (key, offset) pairs over the table
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Precomputed per-token feature keys for one document.
pub struct Featurizer<'a> {
    cfg: &'a FeatureConfig,
    keys: Vec<Vec<u64>>,
}

impl<'a> Featurizer<'a> {
    pub fn new<S: AsRef<str>>(cfg: &'a FeatureConfig, words: &[S]) -> Self {
        let keys = words.iter().map(|w| token_keys(cfg, w.as_ref())).collect();
        Featurizer { cfg, keys }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Feature indices for the token at `pos`, sorted and deduplicated.
    pub fn features(&self, pos: usize, side: Side) -> Vec<u32> {
        let r = self.cfg.window as isize;
        let (lo, hi) = match side {
            Side::Both => (-r, r),
            Side::LeftOnly => (-r, 0),
            Side::RightOnly => (0, r),
        };
        let mask = (self.cfg.dim() - 1) as u64;
        let mut out = vec![(mix(fnv1a(&[b"bias"])) & mask) as u32];
        for d in lo..=hi {
            let Some(t) = pos.checked_add_signed(d).filter(|&t| t < self.keys.len()) else {
                continue;
            };
            let salt = (d + 64) as u64;
            out.extend(
                self.keys[t]
                    .iter()
                    .map(|&k| (mix(k ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15)) & mask) as u32),
            );
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Feature indices for `words[pos]` without reusing a cache.
pub fn featurize<S: AsRef<str>>(cfg: &FeatureConfig, words: &[S], pos: usize, side: Side) -> Vec<u32> {
    Featurizer::new(cfg, words).features(pos, side)
}

fn token_keys(cfg: &FeatureConfig, word: &str) -> Vec<u64> {
    let lower = word.to_lowercase();
    let mut keys = vec![fnv1a(&[b"w", lower.as_bytes()])];

    let padded: Vec<char> = std::iter::once('\u{2}')
        .chain(lower.chars())
        .chain(std::iter::once('\u{3}'))
        .collect();
    let mut buf = String::new();
    for n in cfg.min_ngram.max(1)..=cfg.max_ngram {
        for gram in padded.windows(n) {
            buf.clear();
            buf.extend(gram);
            keys.push(fnv1a(&[b"g", buf.as_bytes()]));
        }
    }

    keys.push(fnv1a(&[b"s", shape(word).as_bytes()]));

    let first = word.chars().next();
    let last = word.chars().last();
    let letters = word.chars().filter(|c| c.is_alphabetic()).count();
    let mut flag = |name: &[u8], on: bool| {
        if on {
            keys.push(fnv1a(&[b"f", name]));
        }
    };
    flag(b"cap", first.is_some_and(char::is_uppercase));
    flag(b"lower", first.is_some_and(char::is_lowercase));
    flag(b"allcaps", letters >= 2 && word.chars().filter(|c| c.is_alphabetic()).all(char::is_uppercase));
    flag(b"nonalnum", !word.is_empty() && !word.chars().any(char::is_alphanumeric));
    flag(b"digit", word.chars().any(|c| c.is_ascii_digit()));
    flag(b"p_end", last.is_some_and(|c| cfg.end_punct.contains(c)));
    flag(b"p_any", last.is_some_and(|c| cfg.punct.contains(c)));
    keys
}

/// Character classes with runs collapsed: "McDonald's" -> "XxXx'x".
fn shape(word: &str) -> String {
    let mut out = String::new();
    for c in word.chars() {
        let s = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_ascii_digit() {
            'd'
        } else if c.is_alphabetic() {
            'a'
        } else {
            c
        };
        if !out.ends_with(s) {
            out.push(s);
        }
    }
    out
}
