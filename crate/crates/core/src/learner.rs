//! The two classifiers used by the experiments: a deterministic linear
//! hinge-loss learner for sentiment labeling and a small kNN classifier for
//! gain prediction.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, Label};

/// Outcome class of a self-training experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GainLabel {
    #[serde(rename = "GAIN")]
    Gain,
    #[serde(rename = "LOSS")]
    Loss,
}

impl std::fmt::Display for GainLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GainLabel::Gain => write!(f, "GAIN"),
            GainLabel::Loss => write!(f, "LOSS"),
        }
    }
}

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training data contains only the {0} class")]
    SingleClass(Label),
    #[error("training instance {0} has no label")]
    UnlabeledInstance(usize),
    #[error("kNN model has no stored instances")]
    EmptyModel,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("query has {got} features, stored instances have {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("stored instance {index} has {got} features, expected {expected}")]
    RaggedInstances {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("failed to access model file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed model file {path}: {reason}")]
    MalformedModel { path: String, reason: String },
}

/// A sparse feature vector with an optional sentiment label.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    features: BTreeMap<String, f64>,
    label: Option<Label>,
}

impl FeatureVector {
    pub fn new(features: BTreeMap<String, f64>, label: Option<Label>) -> FeatureVector {
        FeatureVector { features, label }
    }

    /// Binary occurrence features: every token present in the document maps
    /// to exactly 1.0.
    pub fn binary_from_document(doc: &Document) -> FeatureVector {
        let features = doc.tokens().keys().map(|t| (t.clone(), 1.0)).collect();
        FeatureVector {
            features,
            label: doc.label(),
        }
    }

    pub fn features(&self) -> &BTreeMap<String, f64> {
        &self.features
    }

    pub fn label(&self) -> Option<Label> {
        self.label
    }
}

/// Hyperparameters of the linear learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub regularization: f64,
    pub epochs: u32,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> TrainParams {
        TrainParams {
            regularization: 1e-4,
            epochs: 10,
            seed: 0,
        }
    }
}

/// A trained linear model: sparse weights plus a bias term.
///
/// Training is deterministic: identical data order, hyperparameters and seed
/// produce bit-identical weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    weights: BTreeMap<String, f64>,
    bias: f64,
    params: TrainParams,
}

impl LinearModel {
    pub fn weights(&self) -> &BTreeMap<String, f64> {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn params(&self) -> &TrainParams {
        &self.params
    }

    /// Raw decision value for a feature vector.
    pub fn score(&self, x: &FeatureVector) -> f64 {
        let mut s = self.bias;
        for (token, value) in &x.features {
            if let Some(w) = self.weights.get(token) {
                s += w * value;
            }
        }
        s
    }

    /// Writes the model as one header line (`bias`, hyperparameters) followed
    /// by sorted `token<TAB>weight` lines.
    pub fn save(&self, path: &Path) -> Result<(), LearnerError> {
        use std::io::Write;
        let display = path.display().to_string();
        let io_err = |source| LearnerError::Io {
            path: display.clone(),
            source,
        };
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
        writeln!(
            out,
            "bias={} regularization={} epochs={} seed={}",
            self.bias, self.params.regularization, self.params.epochs, self.params.seed
        )
        .map_err(io_err)?;
        for (token, weight) in &self.weights {
            writeln!(out, "{token}\t{weight}").map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }

    pub fn load(path: &Path) -> Result<LinearModel, LearnerError> {
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| LearnerError::Io {
            path: display.clone(),
            source,
        })?;
        let malformed = |reason: String| LearnerError::MalformedModel {
            path: display.clone(),
            reason,
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| malformed("missing header".into()))?;
        let mut bias = None;
        let mut params = TrainParams::default();
        for field in header.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| malformed(format!("bad header field `{field}`")))?;
            match key {
                "bias" => {
                    bias = Some(value.parse().map_err(|_| {
                        malformed(format!("bad header value in `{field}`"))
                    })?)
                }
                "regularization" => {
                    params.regularization = value.parse().map_err(|_| {
                        malformed(format!("bad header value in `{field}`"))
                    })?
                }
                "epochs" => {
                    params.epochs = value.parse().map_err(|_| {
                        malformed(format!("bad header value in `{field}`"))
                    })?
                }
                "seed" => {
                    params.seed = value.parse().map_err(|_| {
                        malformed(format!("bad header value in `{field}`"))
                    })?
                }
                other => return Err(malformed(format!("unknown header key `{other}`"))),
            }
        }
        let bias = bias.ok_or_else(|| malformed("header lacks bias".into()))?;
        let mut weights = BTreeMap::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let (token, weight) = line
                .split_once('\t')
                .ok_or_else(|| malformed(format!("bad weight line {}", i + 2)))?;
            let weight: f64 = weight
                .parse()
                .map_err(|_| malformed(format!("bad weight on line {}", i + 2)))?;
            weights.insert(token.to_string(), weight);
        }
        Ok(LinearModel {
            weights,
            bias,
            params,
        })
    }
}

fn signed(label: Label) -> f64 {
    match label {
        Label::Positive => 1.0,
        Label::Negative => -1.0,
    }
}

/// Trains an L2-regularized hinge-loss linear model by seeded stochastic
/// subgradient descent with epoch-wise shuffling.
///
/// The weight vector is kept as `scale * dense` so the per-step decay stays
/// O(1) and updates touch only the features of the current instance.
pub fn train_linear(
    data: &[FeatureVector],
    params: &TrainParams,
) -> Result<LinearModel, LearnerError> {
    if data.is_empty() {
        return Err(LearnerError::EmptyTrainingSet);
    }
    let mut saw_pos = false;
    let mut saw_neg = false;
    for (i, fv) in data.iter().enumerate() {
        match fv.label {
            Some(Label::Positive) => saw_pos = true,
            Some(Label::Negative) => saw_neg = true,
            None => return Err(LearnerError::UnlabeledInstance(i)),
        }
    }
    if !saw_neg {
        return Err(LearnerError::SingleClass(Label::Positive));
    }
    if !saw_pos {
        return Err(LearnerError::SingleClass(Label::Negative));
    }

    // Intern tokens so the hot loop works on dense indices.
    let mut vocab: BTreeMap<&str, usize> = BTreeMap::new();
    for fv in data {
        for token in fv.features.keys() {
            let next = vocab.len();
            vocab.entry(token).or_insert(next);
        }
    }
    let instances: Vec<(Vec<(usize, f64)>, f64)> = data
        .iter()
        .map(|fv| {
            let xs = fv
                .features
                .iter()
                .map(|(t, &v)| (vocab[t.as_str()], v))
                .collect();
            (xs, signed(fv.label.expect("validated above")))
        })
        .collect();

    let lambda = params.regularization.max(f64::MIN_POSITIVE);
    // The intercept lives in the weight vector as a constant feature, so it
    // decays with the rest and the large early steps of the 1/(lambda*t)
    // schedule wash out of it too.
    let intercept = vocab.len();
    let mut dense = vec![0.0f64; vocab.len() + 1];
    let mut scale = 1.0f64;
    let mut step: u64 = 0;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..instances.len()).collect();
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            step += 1;
            let eta = 1.0 / (lambda * step as f64);
            let (xs, y) = &instances[i];
            let mut dot = dense[intercept];
            for &(j, v) in xs {
                dot += dense[j] * v;
            }
            let margin = y * scale * dot;

            let decay = 1.0 - eta * lambda; // = 1 - 1/step
            if decay <= 0.0 {
                // Only at step 1, where the decay wipes the (zero) vector.
                dense.iter_mut().for_each(|w| *w = 0.0);
                scale = 1.0;
            } else {
                scale *= decay;
                if scale < 1e-100 {
                    for w in dense.iter_mut() {
                        *w *= scale;
                    }
                    scale = 1.0;
                }
            }
            if margin < 1.0 {
                let push = eta * y / scale;
                for &(j, v) in xs {
                    dense[j] += push * v;
                }
                dense[intercept] += push;
            }
        }
    }

    let bias = scale * dense[intercept];
    let weights = vocab
        .into_iter()
        .filter_map(|(token, idx)| {
            let w = scale * dense[idx];
            (w != 0.0).then(|| (token.to_string(), w))
        })
        .collect();
    Ok(LinearModel {
        weights,
        bias,
        params: *params,
    })
}

/// Sign of the decision value; an exact zero maps to POSITIVE.
pub fn predict_linear(model: &LinearModel, x: &FeatureVector) -> Label {
    if model.score(x) >= 0.0 {
        Label::Positive
    } else {
        Label::Negative
    }
}

/// A kNN classifier over low-dimensional real feature vectors with Euclidean
/// neighbor ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    instances: Vec<(Vec<f64>, GainLabel)>,
    k: usize,
    dim: usize,
}

impl KnnModel {
    pub fn new(instances: Vec<(Vec<f64>, GainLabel)>, k: usize) -> Result<KnnModel, LearnerError> {
        if instances.is_empty() {
            return Err(LearnerError::EmptyModel);
        }
        if k == 0 {
            return Err(LearnerError::ZeroK);
        }
        let dim = instances[0].0.len();
        for (i, (features, _)) in instances.iter().enumerate() {
            if features.len() != dim {
                return Err(LearnerError::RaggedInstances {
                    index: i,
                    expected: dim,
                    got: features.len(),
                });
            }
        }
        Ok(KnnModel { instances, k, dim })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// Majority label among the k nearest stored instances. Distance ties at the
/// k-th position include every tied neighbor; a label tie resolves to LOSS.
pub fn knn_predict(model: &KnnModel, query: &[f64]) -> Result<GainLabel, LearnerError> {
    if query.len() != model.dim {
        return Err(LearnerError::DimensionMismatch {
            expected: model.dim,
            got: query.len(),
        });
    }
    let mut dists: Vec<(f64, GainLabel)> = model
        .instances
        .iter()
        .map(|(features, label)| {
            let d2: f64 = features
                .iter()
                .zip(query)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d2, *label)
        })
        .collect();
    let k = model.k.min(dists.len());
    dists.sort_by(|a, b| a.0.total_cmp(&b.0));
    let threshold = dists[k - 1].0;
    let mut gains = 0usize;
    let mut losses = 0usize;
    for &(d2, label) in dists.iter().take_while(|&&(d2, _)| d2 <= threshold) {
        debug_assert!(d2 <= threshold);
        match label {
            GainLabel::Gain => gains += 1,
            GainLabel::Loss => losses += 1,
        }
    }
    Ok(if gains > losses {
        GainLabel::Gain
    } else {
        GainLabel::Loss
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(tokens: &[&str], label: Option<Label>) -> FeatureVector {
        let features = tokens.iter().map(|t| (t.to_string(), 1.0)).collect();
        FeatureVector::new(features, label)
    }

    fn four_point_set() -> Vec<FeatureVector> {
        vec![
            fv(&["good", "great"], Some(Label::Positive)),
            fv(&["good", "fine"], Some(Label::Positive)),
            fv(&["bad", "awful"], Some(Label::Negative)),
            fv(&["bad", "poor"], Some(Label::Negative)),
        ]
    }

    #[test]
    fn separable_set_reaches_full_training_accuracy() {
        let data = four_point_set();
        let model = train_linear(&data, &TrainParams::default()).unwrap();
        for point in &data {
            assert_eq!(predict_linear(&model, point), point.label().unwrap());
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data = four_point_set();
        let params = TrainParams::default();
        let a = train_linear(&data, &params).unwrap();
        let b = train_linear(&data, &params).unwrap();
        assert_eq!(a.weights(), b.weights());
        assert_eq!(a.bias(), b.bias());
    }

    #[test]
    fn duplicated_data_keeps_decision_signs() {
        let data = four_point_set();
        let mut doubled = data.clone();
        doubled.extend(data.iter().cloned());
        let params = TrainParams::default();
        let base = train_linear(&data, &params).unwrap();
        let dup = train_linear(&doubled, &params).unwrap();
        let probes = vec![
            fv(&["good"], None),
            fv(&["bad"], None),
            fv(&["great", "fine"], None),
            fv(&["awful", "poor"], None),
            fv(&["good", "great", "fine"], None),
            fv(&["bad", "awful", "poor"], None),
        ];
        for probe in &probes {
            assert_eq!(
                predict_linear(&base, probe),
                predict_linear(&dup, probe),
                "probe {:?}",
                probe.features().keys().collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn single_class_data_is_rejected() {
        let data = vec![
            fv(&["good"], Some(Label::Positive)),
            fv(&["great"], Some(Label::Positive)),
        ];
        assert!(matches!(
            train_linear(&data, &TrainParams::default()),
            Err(LearnerError::SingleClass(Label::Positive))
        ));
    }

    #[test]
    fn unlabeled_instance_is_rejected() {
        let data = vec![fv(&["good"], Some(Label::Positive)), fv(&["bad"], None)];
        assert!(matches!(
            train_linear(&data, &TrainParams::default()),
            Err(LearnerError::UnlabeledInstance(1))
        ));
    }

    #[test]
    fn prediction_tie_rules() {
        let mut weights = BTreeMap::new();
        weights.insert("good".to_string(), 1.0);
        let model = LinearModel {
            weights,
            bias: 0.0,
            params: TrainParams::default(),
        };
        assert_eq!(predict_linear(&model, &fv(&["good"], None)), Label::Positive);
        // Only unseen tokens: decided by the (zero) bias, so POSITIVE.
        assert_eq!(predict_linear(&model, &fv(&["unseen"], None)), Label::Positive);

        let negative_bias = LinearModel {
            weights: BTreeMap::new(),
            bias: -0.5,
            params: TrainParams::default(),
        };
        assert_eq!(
            predict_linear(&negative_bias, &FeatureVector::new(BTreeMap::new(), None)),
            Label::Negative
        );
    }

    #[test]
    fn model_save_load_round_trip() {
        let data = four_point_set();
        let model = train_linear(&data, &TrainParams::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        model.save(&path).unwrap();
        let loaded = LinearModel::load(&path).unwrap();
        assert_eq!(loaded, model);
    }

    #[test]
    fn knn_single_instance_always_wins() {
        let model = KnnModel::new(vec![(vec![1.0, 2.0, 3.0], GainLabel::Gain)], 1).unwrap();
        assert_eq!(knn_predict(&model, &[9.0, 9.0, 9.0]).unwrap(), GainLabel::Gain);
        assert_eq!(knn_predict(&model, &[0.0, 0.0, 0.0]).unwrap(), GainLabel::Gain);
    }

    #[test]
    fn knn_zero_distance_neighbor_wins_with_unique_distances() {
        let model = KnnModel::new(
            vec![
                (vec![0.0, 0.0], GainLabel::Gain),
                (vec![5.0, 5.0], GainLabel::Loss),
                (vec![6.0, 6.0], GainLabel::Loss),
            ],
            1,
        )
        .unwrap();
        assert_eq!(knn_predict(&model, &[0.0, 0.0]).unwrap(), GainLabel::Gain);
    }

    /// Exhaustive sort-and-vote reference implementation.
    fn knn_oracle(instances: &[(Vec<f64>, GainLabel)], k: usize, query: &[f64]) -> GainLabel {
        let mut scored: Vec<(f64, GainLabel)> = instances
            .iter()
            .map(|(f, l)| {
                (
                    f.iter()
                        .zip(query)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        .sqrt(),
                    *l,
                )
            })
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        let k = k.min(scored.len());
        let cutoff = scored[k - 1].0;
        let mut gain = 0;
        let mut loss = 0;
        for &(d, l) in &scored {
            if d > cutoff {
                break;
            }
            match l {
                GainLabel::Gain => gain += 1,
                GainLabel::Loss => loss += 1,
            }
        }
        if gain > loss {
            GainLabel::Gain
        } else {
            GainLabel::Loss
        }
    }

    #[test]
    fn knn_matches_oracle_on_small_set() {
        let instances = vec![
            (vec![0.0, 0.0, 0.0], GainLabel::Gain),
            (vec![1.0, 0.0, 0.0], GainLabel::Loss),
            (vec![0.0, 1.0, 0.0], GainLabel::Gain),
            (vec![2.0, 2.0, 2.0], GainLabel::Loss),
            (vec![3.0, 3.0, 3.0], GainLabel::Loss),
        ];
        let model = KnnModel::new(instances.clone(), 3).unwrap();
        for query in [
            [0.1, 0.1, 0.0],
            [2.5, 2.5, 2.5],
            [1.0, 1.0, 1.0],
            [0.0, 0.0, 0.0],
        ] {
            assert_eq!(
                knn_predict(&model, &query).unwrap(),
                knn_oracle(&instances, 3, &query)
            );
        }
    }

    #[test]
    fn knn_distance_ties_include_all_tied_neighbors() {
        // Two zero-distance neighbors with opposite labels: tie → LOSS.
        let model = KnnModel::new(
            vec![
                (vec![1.0], GainLabel::Gain),
                (vec![1.0], GainLabel::Loss),
                (vec![9.0], GainLabel::Gain),
            ],
            1,
        )
        .unwrap();
        assert_eq!(knn_predict(&model, &[1.0]).unwrap(), GainLabel::Loss);
    }

    #[test]
    fn knn_with_k_equal_to_size_is_global_majority() {
        let model = KnnModel::new(
            vec![
                (vec![0.0], GainLabel::Gain),
                (vec![1.0], GainLabel::Loss),
                (vec![2.0], GainLabel::Loss),
            ],
            3,
        )
        .unwrap();
        assert_eq!(knn_predict(&model, &[0.0]).unwrap(), GainLabel::Loss);
    }

    #[test]
    fn knn_dimension_mismatch_errors() {
        let model = KnnModel::new(vec![(vec![1.0, 2.0], GainLabel::Gain)], 1).unwrap();
        assert!(matches!(
            knn_predict(&model, &[1.0]),
            Err(LearnerError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn knn_scaling_invariance() {
        let instances = vec![
            (vec![0.5, 1.5, 2.5], GainLabel::Gain),
            (vec![4.0, 4.0, 4.0], GainLabel::Loss),
            (vec![1.0, 0.0, 3.0], GainLabel::Gain),
            (vec![2.0, 2.0, 2.0], GainLabel::Loss),
        ];
        let query = [1.0, 1.0, 2.0];
        let factor = 7.25;
        let scaled: Vec<(Vec<f64>, GainLabel)> = instances
            .iter()
            .map(|(f, l)| (f.iter().map(|v| v * factor).collect(), *l))
            .collect();
        let scaled_query: Vec<f64> = query.iter().map(|v| v * factor).collect();
        for k in 1..=4 {
            let a = knn_predict(&KnnModel::new(instances.clone(), k).unwrap(), &query).unwrap();
            let b = knn_predict(&KnnModel::new(scaled.clone(), k).unwrap(), &scaled_query).unwrap();
            assert_eq!(a, b, "k={k}");
        }
    }
}
