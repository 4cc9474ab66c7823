//! The five corpus-pair similarity measures.
//!
//! All measures follow one convention: the value is nonnegative and
//! higher values mean less similar corpora. Cosine and Euclidean operate on
//! pairwise-pmi centroid vectors; KL and JS treat the raw centroids as token
//! probability distributions; sUWR compares vocabularies.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::corpus::{centroid, pmi_transform, rel_freq, Corpus, CorpusError, CorpusVector};

/// Smoothing floor substituted for zero denominators in KL (= 2⁻⁵²).
pub const KL_ZERO_FLOOR: f64 = f64::EPSILON;

#[derive(Debug, Error)]
pub enum SimilarityError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("pmi vector for corpus `{domain}` has zero norm")]
    DegenerateVector { domain: String },
    #[error("corpus `{domain}` has an empty vocabulary")]
    EmptyVocabulary { domain: String },
    #[error("corpora must have distinct domain ids, got `{0}` twice")]
    DuplicateDomain(String),
}

/// One of the five similarity measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Measure {
    Cosine,
    Euclidean,
    Kl,
    Js,
    Suwr,
}

impl Measure {
    pub const ALL: [Measure; 5] = [
        Measure::Cosine,
        Measure::Euclidean,
        Measure::Kl,
        Measure::Js,
        Measure::Suwr,
    ];

    /// True when `sim(P, Q) = sim(Q, P)` holds exactly.
    pub fn symmetric(self) -> bool {
        match self {
            Measure::Cosine | Measure::Euclidean | Measure::Js => true,
            Measure::Kl | Measure::Suwr => false,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Measure::Cosine => "cosine",
            Measure::Euclidean => "euclidean",
            Measure::Kl => "kl",
            Measure::Js => "js",
            Measure::Suwr => "suwr",
        }
    }
}

impl std::fmt::Display for Measure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" => Ok(Measure::Cosine),
            "euclidean" => Ok(Measure::Euclidean),
            "kl" => Ok(Measure::Kl),
            "js" => Ok(Measure::Js),
            "suwr" => Ok(Measure::Suwr),
            other => Err(format!("unknown similarity measure `{other}`")),
        }
    }
}

/// A measured similarity between two corpora. `from_corpus` plays the P
/// (test) role and `to_corpus` the Q (train) role, which matters for the
/// asymmetric measures.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityValue {
    pub measure: Measure,
    pub from_corpus: String,
    pub to_corpus: String,
    pub value: f64,
}

/// The three pairwise similarities of a (test, train, extra) triple under one
/// measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityFeatures {
    pub measure: Measure,
    pub test_train: f64,
    pub extra_train: f64,
    pub test_extra: f64,
}

/// Which vectors KL and JS interpret as probability distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistributionSource {
    /// Relative frequencies of the raw centroid counts (the default).
    #[default]
    RawFrequency,
    /// Negative pmi entries clamped to zero, then normalized to sum 1.
    PositivePmi,
}

fn value(measure: Measure, p: &Corpus, q: &Corpus, v: f64) -> SimilarityValue {
    SimilarityValue {
        measure,
        from_corpus: p.domain_id().to_string(),
        to_corpus: q.domain_id().to_string(),
        value: v,
    }
}

/// Builds the two pairwise-pmi centroid vectors for a corpus pair.
fn pmi_pair(p: &Corpus, q: &Corpus) -> Result<(CorpusVector, CorpusVector), SimilarityError> {
    let vp = centroid(p)?;
    let vq = centroid(q)?;
    let pp = pmi_transform(&vp, &vq)?;
    let qq = pmi_transform(&vq, &vp)?;
    Ok((pp, qq))
}

/// 1 − cosine similarity of the pairwise-pmi centroids, so that higher means
/// less similar.
pub fn cosine_distance(p: &Corpus, q: &Corpus) -> Result<SimilarityValue, SimilarityError> {
    let (pp, qq) = pmi_pair(p, q)?;
    // Token-identical corpora produce identical (possibly all-zero) pmi
    // vectors; they are maximally similar by definition.
    if pp.entries() == qq.entries() {
        return Ok(value(Measure::Cosine, p, q, 0.0));
    }
    let mut dot = 0.0;
    let mut norm_p = 0.0;
    let mut norm_q = 0.0;
    for (token, &a) in pp.entries() {
        let b = qq.get(token);
        dot += a * b;
        norm_p += a * a;
        norm_q += b * b;
    }
    if norm_p <= 0.0 {
        return Err(SimilarityError::DegenerateVector {
            domain: p.domain_id().to_string(),
        });
    }
    if norm_q <= 0.0 {
        return Err(SimilarityError::DegenerateVector {
            domain: q.domain_id().to_string(),
        });
    }
    let cos = dot / (norm_p.sqrt() * norm_q.sqrt());
    Ok(value(Measure::Cosine, p, q, (1.0 - cos).max(0.0)))
}

/// Euclidean distance between the pairwise-pmi centroids over the union
/// vocabulary.
pub fn euclidean_distance(p: &Corpus, q: &Corpus) -> Result<SimilarityValue, SimilarityError> {
    let (pp, qq) = pmi_pair(p, q)?;
    let mut sum = 0.0;
    for (token, &a) in pp.entries() {
        let d = a - qq.get(token);
        sum += d * d;
    }
    Ok(value(Measure::Euclidean, p, q, sum.sqrt()))
}

/// Kullback-Leibler divergence KL(P; Q) in bits over token distributions,
/// with zero denominators floored at 2⁻⁵².
pub fn kl_divergence(p: &Corpus, q: &Corpus) -> Result<SimilarityValue, SimilarityError> {
    kl_divergence_with(p, q, DistributionSource::RawFrequency)
}

pub fn kl_divergence_with(
    p: &Corpus,
    q: &Corpus,
    source: DistributionSource,
) -> Result<SimilarityValue, SimilarityError> {
    let (pd, qd) = distributions(p, q, source)?;
    Ok(value(Measure::Kl, p, q, kl_bits(&pd, &qd)))
}

/// Jensen-Shannon divergence in bits; symmetric and bounded by 1.
pub fn js_divergence(p: &Corpus, q: &Corpus) -> Result<SimilarityValue, SimilarityError> {
    js_divergence_with(p, q, DistributionSource::RawFrequency)
}

pub fn js_divergence_with(
    p: &Corpus,
    q: &Corpus,
    source: DistributionSource,
) -> Result<SimilarityValue, SimilarityError> {
    let (pd, qd) = distributions(p, q, source)?;
    Ok(value(Measure::Js, p, q, js_bits(&pd, &qd)))
}

/// Simple unknown-word ratio: the fraction of token types of P unseen in Q.
pub fn suwr(p: &Corpus, q: &Corpus) -> Result<SimilarityValue, SimilarityError> {
    let p_vocab = p.vocabulary();
    if p_vocab.is_empty() {
        return Err(SimilarityError::EmptyVocabulary {
            domain: p.domain_id().to_string(),
        });
    }
    let unseen = p_vocab.difference(q.vocabulary()).count();
    let ratio = unseen as f64 / p_vocab.len() as f64;
    Ok(value(Measure::Suwr, p, q, ratio))
}

/// Dispatches to the requested measure.
pub fn compute(measure: Measure, p: &Corpus, q: &Corpus) -> Result<SimilarityValue, SimilarityError> {
    match measure {
        Measure::Cosine => cosine_distance(p, q),
        Measure::Euclidean => euclidean_distance(p, q),
        Measure::Kl => kl_divergence(p, q),
        Measure::Js => js_divergence(p, q),
        Measure::Suwr => suwr(p, q),
    }
}

/// The three pairwise similarities of a triple under one measure. For the
/// asymmetric measures the first-named corpus of each pair plays the P role.
pub fn similarity_features(
    test: &Corpus,
    train: &Corpus,
    extra: &Corpus,
    measure: Measure,
) -> Result<SimilarityFeatures, SimilarityError> {
    let ids = [test.domain_id(), train.domain_id(), extra.domain_id()];
    for i in 0..3 {
        for j in (i + 1)..3 {
            if ids[i] == ids[j] {
                return Err(SimilarityError::DuplicateDomain(ids[i].to_string()));
            }
        }
    }
    Ok(SimilarityFeatures {
        measure,
        test_train: compute(measure, test, train)?.value,
        extra_train: compute(measure, extra, train)?.value,
        test_extra: compute(measure, test, extra)?.value,
    })
}

type TokenDistribution = BTreeMap<String, f64>;

fn distributions(
    p: &Corpus,
    q: &Corpus,
    source: DistributionSource,
) -> Result<(TokenDistribution, TokenDistribution), SimilarityError> {
    match source {
        DistributionSource::RawFrequency => {
            let pd = rel_freq(&centroid(p)?)?;
            let qd = rel_freq(&centroid(q)?)?;
            Ok((pd.entries().clone(), qd.entries().clone()))
        }
        DistributionSource::PositivePmi => {
            let (pp, qq) = pmi_pair(p, q)?;
            let pd = positive_normalized(&pp).ok_or_else(|| SimilarityError::DegenerateVector {
                domain: p.domain_id().to_string(),
            })?;
            let qd = positive_normalized(&qq).ok_or_else(|| SimilarityError::DegenerateVector {
                domain: q.domain_id().to_string(),
            })?;
            Ok((pd, qd))
        }
    }
}

fn positive_normalized(v: &CorpusVector) -> Option<BTreeMap<String, f64>> {
    let clamped: BTreeMap<String, f64> = v
        .entries()
        .iter()
        .filter(|&(_, &w)| w > 0.0)
        .map(|(t, &w)| (t.clone(), w))
        .collect();
    let total: f64 = clamped.values().sum();
    if total <= 0.0 {
        return None;
    }
    Some(clamped.into_iter().map(|(t, w)| (t, w / total)).collect())
}

/// KL(P; Q) in bits over sparse distributions; tokens with `p = 0` contribute
/// nothing, zero denominators are floored at [`KL_ZERO_FLOOR`].
fn kl_bits(pd: &BTreeMap<String, f64>, qd: &BTreeMap<String, f64>) -> f64 {
    let mut sum = 0.0;
    for (token, &p) in pd {
        if p <= 0.0 {
            continue;
        }
        let q = qd.get(token).copied().unwrap_or(0.0);
        let q = if q == 0.0 { KL_ZERO_FLOOR } else { q };
        sum += p * (p / q).log2();
    }
    sum.max(0.0)
}

/// JS(P; Q) in bits: the mixture denominator is positive wherever either
/// distribution is, so no smoothing is needed. Each KL term only needs its
/// own support, which keeps every token visited exactly once.
fn js_bits(pd: &BTreeMap<String, f64>, qd: &BTreeMap<String, f64>) -> f64 {
    let mut kl_pm = 0.0;
    for (token, &p) in pd {
        if p <= 0.0 {
            continue;
        }
        let m = 0.5 * (p + qd.get(token).copied().unwrap_or(0.0));
        kl_pm += p * (p / m).log2();
    }
    let mut kl_qm = 0.0;
    for (token, &q) in qd {
        if q <= 0.0 {
            continue;
        }
        let m = 0.5 * (q + pd.get(token).copied().unwrap_or(0.0));
        kl_qm += q * (q / m).log2();
    }
    (0.5 * (kl_pm + kl_qm)).max(0.0)
}
