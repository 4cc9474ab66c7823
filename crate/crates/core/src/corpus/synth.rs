//! Deterministic synthetic-domain generator.
//!
//! Stands in for review datasets that cannot be redistributed: it produces a
//! family of labeled bag-of-words domains whose pairwise divergence is
//! controlled by a single knob.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Corpus, CorpusError, Document, Label};

const MIN_DOC_LEN: usize = 20;
const MAX_DOC_LEN: usize = 45;

/// Generates `n_domains` corpora of `docs_per_domain` labeled documents each.
///
/// Every domain draws tokens from a mixture of one shared Zipf distribution
/// over the whole vocabulary and a domain-own Zipf distribution over a
/// disjoint vocabulary slice. `divergence_knob` = 0 makes all domains sample
/// from the shared distribution alone; 1 makes their supports disjoint. At
/// intermediate settings each domain additionally drops a knob-scaled,
/// domain-specific share of the tokens outside its own slice, so vocabulary
/// overlap between domains varies the way it does between real domains.
///
/// Labels come from a per-domain linear rule over token occurrences, so the
/// labeling task is learnable by a linear classifier. The rule agrees with a
/// global polarity on shared vocabulary and is domain-specific on the domain's
/// own slice.
pub fn generate_synthetic_domains(
    n_domains: usize,
    vocab_size: usize,
    docs_per_domain: usize,
    divergence_knob: f64,
    seed: u64,
) -> Result<Vec<Corpus>, CorpusError> {
    if n_domains == 0 || vocab_size == 0 || docs_per_domain == 0 {
        return Err(CorpusError::InvalidArgument(
            "domain count, vocabulary size and documents per domain must be positive".into(),
        ));
    }
    if !(0.0..=1.0).contains(&divergence_knob) {
        return Err(CorpusError::InvalidArgument(format!(
            "divergence knob {divergence_knob} outside [0, 1]"
        )));
    }
    let slice = vocab_size / n_domains;
    if slice == 0 {
        return Err(CorpusError::InvalidArgument(format!(
            "vocabulary size {vocab_size} too small for {n_domains} domains"
        )));
    }

    let width = vocab_size.saturating_sub(1).to_string().len().max(3);
    let vocab: Vec<String> = (0..vocab_size)
        .map(|i| format!("t{i:0width$}"))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Global token polarity, shared by every domain's labeling rule.
    let global_polarity: Vec<f64> = (0..vocab_size)
        .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
        .collect();

    // Shared Zipf weights over the full vocabulary.
    let shared: Vec<f64> = zipf_weights(vocab_size);

    let mut corpora = Vec::with_capacity(n_domains);
    for d in 0..n_domains {
        let own_start = d * slice;
        let own_end = if d + 1 == n_domains { vocab_size } else { own_start + slice };

        // Token distribution: mixture of the shared distribution and a Zipf
        // distribution over this domain's own slice.
        let own_len = own_end - own_start;
        let own = zipf_weights(own_len);
        let mut weights: Vec<f64> = shared
            .iter()
            .map(|w| (1.0 - divergence_knob) * w)
            .collect();
        for (j, w) in own.iter().enumerate() {
            weights[own_start + j] += divergence_knob * w;
        }
        // Drop a domain-specific share of the foreign vocabulary so unseen
        // word ratios between domains stay informative.
        let dropout = 0.3 * divergence_knob * rng.gen::<f64>();
        for (idx, w) in weights.iter_mut().enumerate() {
            if (idx < own_start || idx >= own_end) && rng.gen::<f64>() < dropout {
                *w = 0.0;
            }
        }
        let cumulative = cumulative_sums(&weights);

        // Domain rule: global polarity everywhere except the own slice.
        let mut polarity = global_polarity.clone();
        for p in polarity.iter_mut().take(own_end).skip(own_start) {
            *p = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        }

        let mut documents = Vec::with_capacity(docs_per_domain);
        for _ in 0..docs_per_domain {
            let len = rng.gen_range(MIN_DOC_LEN..=MAX_DOC_LEN);
            let mut tokens: BTreeMap<String, u32> = BTreeMap::new();
            let mut indices = Vec::with_capacity(len);
            for _ in 0..len {
                let idx = sample_index(&cumulative, &mut rng);
                indices.push(idx);
                *tokens.entry(vocab[idx].clone()).or_insert(0) += 1;
            }
            indices.sort_unstable();
            indices.dedup();
            let score: f64 = indices.iter().map(|&i| polarity[i]).sum();
            let label = if score >= 0.0 { Label::Positive } else { Label::Negative };
            documents.push(Document::new(tokens, Some(label))?);
        }
        corpora.push(Corpus::new(format!("d{d:02}"), documents));
    }
    Ok(corpora)
}

fn zipf_weights(n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|i| 1.0 / (i as f64 + 1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn cumulative_sums(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

fn sample_index(cumulative: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total = *cumulative.last().expect("non-empty weights");
    let x = rng.gen::<f64>() * total;
    match cumulative.binary_search_by(|c| c.partial_cmp(&x).expect("finite weights")) {
        Ok(i) => i,
        Err(i) => i.min(cumulative.len() - 1),
    }
}
