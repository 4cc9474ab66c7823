//! Domain corpora: documents, loading and saving, seeded sampling, centroid
//! vectors and their pmi / relative-frequency transforms.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod format;
mod synth;

pub use format::{load_corpus, save_corpus, CorpusFormat};
pub use synth::generate_synthetic_domains;

/// Sentiment label of a labeled document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "POSITIVE")]
    Positive,
    #[serde(rename = "NEGATIVE")]
    Negative,
}

impl Label {
    pub fn flipped(self) -> Label {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Label::Positive => write!(f, "positive"),
            Label::Negative => write!(f, "negative"),
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed {what} at line {line}")]
    Malformed {
        path: String,
        line: usize,
        what: String,
    },
    #[error("{path}: unknown label `{token}` at line {line}")]
    UnknownLabel {
        path: String,
        line: usize,
        token: String,
    },
    #[error("{path}: empty corpus file")]
    EmptyFile { path: String },
    #[error("invalid document: {0}")]
    InvalidDocument(String),
    #[error("sample size {requested} exceeds corpus size {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("stratified sampling requested on corpus `{domain}` with unlabeled documents")]
    StratifyUnlabeled { domain: String },
    #[error("corpus `{domain}` is empty")]
    EmptyCorpus { domain: String },
    #[error("vector has zero token mass")]
    ZeroMass,
    #[error("expected a {expected:?} vector, got {got:?}")]
    WrongWeighting { expected: Weighting, got: Weighting },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// A labeled or unlabeled bag-of-words instance.
///
/// Token counts are kept in a `BTreeMap` so that iteration order, equality
/// and serialization are all deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    tokens: BTreeMap<String, u32>,
    label: Option<Label>,
}

impl Document {
    /// Builds a document, validating that every token is non-empty, free of
    /// whitespace (the line formats could not represent it) and has a
    /// positive count.
    pub fn new(tokens: BTreeMap<String, u32>, label: Option<Label>) -> Result<Self, CorpusError> {
        for (token, &count) in &tokens {
            if token.is_empty() {
                return Err(CorpusError::InvalidDocument("empty token string".into()));
            }
            if token.chars().any(char::is_whitespace) {
                return Err(CorpusError::InvalidDocument(format!(
                    "token `{token}` contains whitespace"
                )));
            }
            if count == 0 {
                return Err(CorpusError::InvalidDocument(format!(
                    "token `{token}` has zero count"
                )));
            }
        }
        Ok(Document { tokens, label })
    }

    pub fn tokens(&self) -> &BTreeMap<String, u32> {
        &self.tokens
    }

    pub fn label(&self) -> Option<Label> {
        self.label
    }

    /// Total number of token occurrences.
    pub fn token_mass(&self) -> u64 {
        self.tokens.values().map(|&c| u64::from(c)).sum()
    }

    /// Same bag of words with the label replaced.
    pub fn with_label(&self, label: Option<Label>) -> Document {
        Document {
            tokens: self.tokens.clone(),
            label,
        }
    }
}

/// An ordered collection of documents from one domain.
///
/// The vocabulary is derived at construction time and always equals the union
/// of the token keys over all documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    domain_id: String,
    documents: Vec<Document>,
    vocabulary: BTreeSet<String>,
}

impl Corpus {
    pub fn new(domain_id: impl Into<String>, documents: Vec<Document>) -> Corpus {
        let vocabulary = documents
            .iter()
            .flat_map(|d| d.tokens.keys().cloned())
            .collect();
        Corpus {
            domain_id: domain_id.into(),
            documents,
            vocabulary,
        }
    }

    /// Concatenates several corpora (in the given order) under a new domain id.
    pub fn concat<'a>(domain_id: impl Into<String>, parts: impl IntoIterator<Item = &'a Corpus>) -> Corpus {
        let documents = parts
            .into_iter()
            .flat_map(|c| c.documents.iter().cloned())
            .collect();
        Corpus::new(domain_id, documents)
    }

    pub fn domain_id(&self) -> &str {
        &self.domain_id
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn vocabulary(&self) -> &BTreeSet<String> {
        &self.vocabulary
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// True when every document carries a label.
    pub fn is_fully_labeled(&self) -> bool {
        self.documents.iter().all(|d| d.label.is_some())
    }

    /// (positive, negative, unlabeled) document counts.
    pub fn label_counts(&self) -> (usize, usize, usize) {
        let mut pos = 0;
        let mut neg = 0;
        let mut unl = 0;
        for doc in &self.documents {
            match doc.label {
                Some(Label::Positive) => pos += 1,
                Some(Label::Negative) => neg += 1,
                None => unl += 1,
            }
        }
        (pos, neg, unl)
    }

    /// Total token mass over all documents.
    pub fn token_mass(&self) -> u64 {
        self.documents.iter().map(Document::token_mass).sum()
    }
}

/// Weighting scheme of a [`CorpusVector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weighting {
    RawCount,
    Pmi,
    RelFreq,
}

/// Centroid representation of a corpus under one weighting scheme.
///
/// `total_count` always records the raw token mass of the underlying corpus,
/// regardless of the weighting, so pmi denominators stay reconstructible.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusVector {
    weighting: Weighting,
    entries: BTreeMap<String, f64>,
    total_count: f64,
}

impl CorpusVector {
    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    pub fn entries(&self) -> &BTreeMap<String, f64> {
        &self.entries
    }

    /// Entry for `token`, defaulting to 0 for absent tokens.
    pub fn get(&self, token: &str) -> f64 {
        self.entries.get(token).copied().unwrap_or(0.0)
    }

    pub fn total_count(&self) -> f64 {
        self.total_count
    }
}

/// Sums token counts over all documents into a raw-count centroid.
pub fn centroid(corpus: &Corpus) -> Result<CorpusVector, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus {
            domain: corpus.domain_id.clone(),
        });
    }
    let mut entries: BTreeMap<String, f64> = BTreeMap::new();
    for doc in &corpus.documents {
        for (token, &count) in &doc.tokens {
            *entries.entry(token.clone()).or_insert(0.0) += f64::from(count);
        }
    }
    let total_count = entries.values().sum();
    Ok(CorpusVector {
        weighting: Weighting::RawCount,
        entries,
        total_count,
    })
}

/// Reweights a raw-count vector by pointwise mutual information relative to
/// exactly one partner vector.
///
/// For each token in the union vocabulary with count `c_tv` in `v`, count sum
/// `c_t = c_tv + c_t_partner`, vector mass `c_v` and joint mass `n`, the entry
/// becomes `ln(n * c_tv / (c_t * c_v))`. Tokens absent from `v` get entry 0,
/// which keeps the vector finite and makes token-identical corpora coincide.
pub fn pmi_transform(v: &CorpusVector, partner: &CorpusVector) -> Result<CorpusVector, CorpusError> {
    for vec in [v, partner] {
        if vec.weighting != Weighting::RawCount {
            return Err(CorpusError::WrongWeighting {
                expected: Weighting::RawCount,
                got: vec.weighting,
            });
        }
    }
    if v.total_count <= 0.0 || partner.total_count <= 0.0 {
        return Err(CorpusError::ZeroMass);
    }
    let n = v.total_count + partner.total_count;
    let c_v = v.total_count;
    let mut entries = BTreeMap::new();
    for token in v.entries.keys().chain(partner.entries.keys()) {
        let c_tv = v.get(token);
        let value = if c_tv > 0.0 {
            let c_t = c_tv + partner.get(token);
            (n * c_tv / (c_t * c_v)).ln()
        } else {
            0.0
        };
        entries.insert(token.clone(), value);
    }
    Ok(CorpusVector {
        weighting: Weighting::Pmi,
        entries,
        total_count: v.total_count,
    })
}

/// Normalizes a raw-count vector into a probability distribution over tokens.
pub fn rel_freq(v: &CorpusVector) -> Result<CorpusVector, CorpusError> {
    if v.weighting != Weighting::RawCount {
        return Err(CorpusError::WrongWeighting {
            expected: Weighting::RawCount,
            got: v.weighting,
        });
    }
    if v.total_count <= 0.0 {
        return Err(CorpusError::ZeroMass);
    }
    let entries = v
        .entries
        .iter()
        .map(|(token, &count)| (token.clone(), count / v.total_count))
        .collect();
    Ok(CorpusVector {
        weighting: Weighting::RelFreq,
        entries,
        total_count: v.total_count,
    })
}

/// Draws `size` documents without replacement, deterministically under `seed`.
///
/// The sampled documents keep their original corpus order. With `stratify`
/// the per-label proportions of the source corpus are preserved within one
/// document; this requires a fully labeled corpus.
pub fn sample_corpus(
    corpus: &Corpus,
    size: usize,
    seed: u64,
    stratify: bool,
) -> Result<Corpus, CorpusError> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    if size > corpus.len() {
        return Err(CorpusError::SampleTooLarge {
            requested: size,
            available: corpus.len(),
        });
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = if stratify {
        if !corpus.is_fully_labeled() {
            return Err(CorpusError::StratifyUnlabeled {
                domain: corpus.domain_id.clone(),
            });
        }
        let mut pos_idx = Vec::new();
        let mut neg_idx = Vec::new();
        for (i, doc) in corpus.documents.iter().enumerate() {
            match doc.label {
                Some(Label::Positive) => pos_idx.push(i),
                Some(Label::Negative) => neg_idx.push(i),
                None => unreachable!(),
            }
        }
        let total = corpus.len();
        // Round the positive quota to the nearest document, then clamp both
        // quotas to what each stratum can supply.
        let mut n_pos = (size * pos_idx.len() + total / 2) / total;
        n_pos = n_pos.min(pos_idx.len()).max(size.saturating_sub(neg_idx.len()));
        let n_neg = size - n_pos;

        let mut picked = Vec::with_capacity(size);
        pos_idx.shuffle(&mut rng);
        picked.extend_from_slice(&pos_idx[..n_pos]);
        neg_idx.shuffle(&mut rng);
        picked.extend_from_slice(&neg_idx[..n_neg]);
        picked
    } else {
        let mut idx: Vec<usize> = (0..corpus.len()).collect();
        idx.shuffle(&mut rng);
        idx.truncate(size);
        idx
    };
    picked.sort_unstable();
    let documents = picked
        .into_iter()
        .map(|i| corpus.documents[i].clone())
        .collect();
    Ok(Corpus::new(corpus.domain_id.clone(), documents))
}
