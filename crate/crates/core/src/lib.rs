//! Toolkit for measuring similarity between bag-of-words text corpora and for
//! running and predicting two-step self-training experiments.
//!
//! The crate is organized around a small pipeline:
//!
//! 1. [`corpus`]: ingest, normalize (seeded sampling) and vectorize domain
//!    corpora; includes a deterministic synthetic-domain generator for tests
//!    and demos.
//! 2. [`similarity`]: five corpus-pair measures (cosine and Euclidean over
//!    pairwise-pmi centroids, KL and Jensen-Shannon divergence, simple
//!    unknown-word ratio). All follow the convention that higher values mean
//!    less similar corpora.
//! 3. [`learner`]: the two classifiers the experiments need, a deterministic
//!    linear hinge-loss learner for sentiment labeling and a small kNN
//!    classifier for gain prediction.
//! 4. [`selftrain`]: the two-step self-training procedure over
//!    (train, test, additional) corpus triples, setup enumeration, and the
//!    JSONL result schema.
//! 5. [`metrics`]: confusion-matrix scores (accuracy, per-class P/R/F1,
//!    macro-F1) and approximate randomization significance testing.
//! 6. [`predictor`]: gain prediction via the unsupervised delta indicator,
//!    one-class and history baselines, leave-one-out and tailored
//!    leave-one-out cross-validation over similarity features, and the
//!    DOMAIN-vs-BULK grid.

pub mod corpus;
pub mod learner;
pub mod metrics;
pub mod predictor;
pub mod selftrain;
pub mod similarity;

pub use corpus::{Corpus, CorpusVector, Document, Label, Weighting};
pub use learner::{FeatureVector, GainLabel, KnnModel, LinearModel, TrainParams};
pub use metrics::{ConfusionCounts, Scores};
pub use selftrain::{ExtraSource, SelfTrainResult, SetupTriple, SweepRecord};
pub use similarity::{Measure, SimilarityFeatures, SimilarityValue};
