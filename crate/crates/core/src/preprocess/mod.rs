//! Text normalization, stemming, n-gram extraction, vocabulary construction,
//! bag-of-n-grams vectorization and integer sequence encoding.

mod porter;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use porter::porter_stem;

/// Padding index in sequence vocabularies.
pub const PAD_INDEX: usize = 0;
/// Out-of-vocabulary index in sequence vocabularies.
pub const OOV_INDEX: usize = 1;

/// Separator used when joining n-gram members; tokenization cannot produce
/// it, so joined n-grams never collide with unigrams.
pub const NGRAM_SEPARATOR: char = '_';

#[derive(Debug, thiserror::Error)]
pub enum PreprocessError {
    #[error("training corpus is empty")]
    EmptyTrainingCorpus,
    #[error("n-gram order must be at least 1")]
    InvalidNgramOrder,
}

/// Lowercases and splits on every non-ASCII-letter character; output tokens
/// match `^[a-z]+$`.
pub fn normalize_and_tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphabetic())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_ascii_lowercase())
        .collect()
}

/// Full token pipeline for one note: tokenize then Porter-stem.
pub fn preprocess_text(text: &str) -> Vec<String> {
    normalize_and_tokenize(text)
        .iter()
        .map(|t| porter_stem(t))
        .collect()
}

/// Contiguous n-token windows, order preserved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramConfig {
    pub n: usize,
}

impl NgramConfig {
    pub fn new(n: usize) -> Result<Self, PreprocessError> {
        if n == 0 {
            return Err(PreprocessError::InvalidNgramOrder);
        }
        Ok(NgramConfig { n })
    }
}

/// All contiguous n-grams of `tokens`, joined with [`NGRAM_SEPARATOR`];
/// count is max(0, len − n + 1).
pub fn extract_ngrams(tokens: &[String], config: NgramConfig) -> Vec<String> {
    if tokens.len() < config.n {
        return Vec::new();
    }
    tokens
        .windows(config.n)
        .map(|w| w.join(&NGRAM_SEPARATOR.to_string()))
        .collect()
}

/// Token-to-index map for sequence encoding; indices 0 and 1 are reserved
/// for padding and out-of-vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    index: BTreeMap<String, usize>,
    frequencies: BTreeMap<String, u64>,
    pub max_words: usize,
}

impl Vocabulary {
    /// Keeps the `max_words` most frequent tokens of the training lists;
    /// ties break lexicographically; indices follow descending frequency
    /// then lexicographic order, starting at 2.
    pub fn build(
        training_token_lists: &[Vec<String>],
        max_words: usize,
    ) -> Result<Self, PreprocessError> {
        if training_token_lists.is_empty() {
            return Err(PreprocessError::EmptyTrainingCorpus);
        }
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for list in training_token_lists {
            for token in list {
                *counts.entry(token).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        ranked.truncate(max_words);

        let mut index = BTreeMap::new();
        let mut frequencies = BTreeMap::new();
        for (rank, (token, freq)) in ranked.into_iter().enumerate() {
            index.insert(token.to_string(), rank + 2);
            frequencies.insert(token.to_string(), freq);
        }
        Ok(Vocabulary {
            index,
            frequencies,
            max_words,
        })
    }

    /// Total size including the two reserved indices.
    pub fn size(&self) -> usize {
        self.index.len() + 2
    }

    pub fn lookup(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(OOV_INDEX)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn frequency(&self, token: &str) -> u64 {
        self.frequencies.get(token).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.index.iter().map(|(t, &i)| (t.as_str(), i))
    }
}

/// Fixed-length integer encoding of one note.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub indices: Vec<usize>,
    pub original_length: usize,
}

/// Unknown tokens map to [`OOV_INDEX`]; longer sequences keep the first
/// `max_len` tokens; shorter ones are post-padded with [`PAD_INDEX`].
pub fn encode_sequence(tokens: &[String], vocab: &Vocabulary, max_len: usize) -> TokenSequence {
    let mut indices: Vec<usize> = tokens.iter().take(max_len).map(|t| vocab.lookup(t)).collect();
    indices.resize(max_len, PAD_INDEX);
    TokenSequence {
        indices,
        original_length: tokens.len(),
    }
}

/// N-gram id space for bag-of-n-grams features, fixed at training time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramVocabulary {
    index: BTreeMap<String, usize>,
    pub config: NgramConfig,
}

impl NgramVocabulary {
    pub fn build(
        training_token_lists: &[Vec<String>],
        config: NgramConfig,
    ) -> Result<Self, PreprocessError> {
        if training_token_lists.is_empty() {
            return Err(PreprocessError::EmptyTrainingCorpus);
        }
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for list in training_token_lists {
            for gram in extract_ngrams(list, config) {
                *counts.entry(gram).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let index = ranked
            .into_iter()
            .enumerate()
            .map(|(rank, (gram, _))| (gram, rank))
            .collect();
        Ok(NgramVocabulary { index, config })
    }

    pub fn dimension(&self) -> usize {
        self.index.len()
    }

    pub fn lookup(&self, gram: &str) -> Option<usize> {
        self.index.get(gram).copied()
    }
}

/// Sparse raw-count feature vector over a fixed n-gram id space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub counts: BTreeMap<usize, f64>,
    pub dimension: usize,
}

impl FeatureVector {
    pub fn total_count(&self) -> f64 {
        self.counts.values().sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.counts.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &FeatureVector) -> f64 {
        // Iterate the smaller map.
        let (small, large) = if self.counts.len() <= other.counts.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .counts
            .iter()
            .filter_map(|(k, v)| large.counts.get(k).map(|w| v * w))
            .sum()
    }
}

/// Raw term-frequency counts; n-grams outside the training vocabulary are
/// dropped.
pub fn vectorize_bow(tokens: &[String], vocab: &NgramVocabulary) -> FeatureVector {
    let mut counts = BTreeMap::new();
    for gram in extract_ngrams(tokens, vocab.config) {
        if let Some(id) = vocab.lookup(&gram) {
            *counts.entry(id).or_insert(0.0) += 1.0;
        }
    }
    FeatureVector {
        counts,
        dimension: vocab.dimension(),
    }
}
