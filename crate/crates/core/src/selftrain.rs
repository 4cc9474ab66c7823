//! The two-step self-training procedure over (train, test, additional)
//! corpus triples, setup enumeration, and the JSONL result schema written by
//! experiment sweeps.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError, Label};
use crate::learner::{
    predict_linear, train_linear, FeatureVector, GainLabel, LearnerError, TrainParams,
};
use crate::metrics::{
    approx_randomization, ConfusionCounts, MetricsError, RandomizationMode, Scores, Statistic,
};
use crate::similarity::Measure;

/// Domain id reserved for the concatenated additional-data corpus.
pub const BULK_ID: &str = "BULK";

#[derive(Debug, Error)]
pub enum SelfTrainError {
    #[error("setup domains must be pairwise distinct: {0:?}")]
    DomainsNotDistinct(Vec<String>),
    #[error("`{0}` is reserved for the concatenated additional-data corpus")]
    ReservedDomainId(String),
    #[error("corpus `{0}` is missing from the corpus map")]
    MissingCorpus(String),
    #[error("corpus `{0}` must be fully labeled for this role")]
    UnlabeledCorpus(String),
    #[error("need at least {needed} domains, got {got}")]
    TooFewDomains { needed: usize, got: usize },
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("failed to access results file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad record on line {line} of {path}: {source}")]
    BadRecord {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Source of the additional (unlabeled) data of a setup.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtraSource {
    /// A single named domain.
    Domain(String),
    /// The concatenation of every domain other than train and test.
    Bulk,
}

impl ExtraSource {
    pub fn as_str(&self) -> &str {
        match self {
            ExtraSource::Domain(id) => id,
            ExtraSource::Bulk => BULK_ID,
        }
    }
}

impl std::fmt::Display for ExtraSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One (train, test, additional) experiment configuration.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SetupTriple {
    pub train_domain: String,
    pub test_domain: String,
    pub extra: ExtraSource,
    pub seed: u64,
}

impl SetupTriple {
    /// Validates pairwise distinctness of the involved domains.
    pub fn new(
        train_domain: impl Into<String>,
        test_domain: impl Into<String>,
        extra: ExtraSource,
        seed: u64,
    ) -> Result<SetupTriple, SelfTrainError> {
        let train_domain = train_domain.into();
        let test_domain = test_domain.into();
        for id in [&train_domain, &test_domain] {
            if id == BULK_ID {
                return Err(SelfTrainError::ReservedDomainId(id.clone()));
            }
        }
        if let ExtraSource::Domain(id) = &extra {
            if id == BULK_ID {
                return Err(SelfTrainError::ReservedDomainId(id.clone()));
            }
        }
        let mut ids = vec![train_domain.clone(), test_domain.clone()];
        if let ExtraSource::Domain(id) = &extra {
            ids.push(id.clone());
        }
        let mut sorted = ids.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != ids.len() {
            return Err(SelfTrainError::DomainsNotDistinct(ids));
        }
        Ok(SetupTriple {
            train_domain,
            test_domain,
            extra,
            seed,
        })
    }

    /// Stable identifier used for resumability and sorting.
    pub fn setup_id(&self) -> String {
        format!(
            "{}|{}|{}|{}",
            self.train_domain, self.test_domain, self.extra, self.seed
        )
    }
}

/// Measured outcome of one self-training experiment. All scores are
/// percentages in [0, 100].
#[derive(Debug, Clone, PartialEq)]
pub struct SelfTrainResult {
    pub setup: SetupTriple,
    pub base_f1: f64,
    pub st_f1: f64,
    pub base_acc: f64,
    pub st_acc: f64,
    pub gain_label: GainLabel,
    pub p_value: Option<f64>,
    pub pseudo_label_accuracy: Option<f64>,
}

/// Parameters of one experiment run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentParams {
    pub train: TrainParams,
    /// Monte-Carlo iterations for the significance test; 0 skips it.
    pub significance_iterations: u32,
}

impl Default for ExperimentParams {
    fn default() -> ExperimentParams {
        ExperimentParams {
            train: TrainParams::default(),
            significance_iterations: 1000,
        }
    }
}

/// Sweep enumeration mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// All ordered triples of distinct domains.
    Domain,
    /// All ordered (train, test) pairs with the concatenated rest as extra.
    Bulk,
}

/// Enumerates setups in stable lexicographic order. DOMAIN mode yields
/// d·(d−1)·(d−2) triples, BULK mode d·(d−1) pairs.
pub fn enumerate_setups(
    domains: &[String],
    mode: SweepMode,
) -> Result<Vec<SetupTriple>, SelfTrainError> {
    if domains.len() < 3 {
        return Err(SelfTrainError::TooFewDomains {
            needed: 3,
            got: domains.len(),
        });
    }
    let mut sorted: Vec<String> = domains.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != domains.len() {
        return Err(SelfTrainError::DomainsNotDistinct(domains.to_vec()));
    }
    let mut setups = Vec::new();
    for train in &sorted {
        for test in &sorted {
            if test == train {
                continue;
            }
            match mode {
                SweepMode::Domain => {
                    for extra in &sorted {
                        if extra == train || extra == test {
                            continue;
                        }
                        setups.push(SetupTriple::new(
                            train,
                            test,
                            ExtraSource::Domain(extra.clone()),
                            0,
                        )?);
                    }
                }
                SweepMode::Bulk => {
                    setups.push(SetupTriple::new(train, test, ExtraSource::Bulk, 0)?);
                }
            }
        }
    }
    Ok(setups)
}

fn features_of(corpus: &Corpus) -> Vec<FeatureVector> {
    corpus
        .documents()
        .iter()
        .map(FeatureVector::binary_from_document)
        .collect()
}

fn require_labeled(corpus: &Corpus) -> Result<(), SelfTrainError> {
    if !corpus.is_fully_labeled() {
        return Err(SelfTrainError::UnlabeledCorpus(
            corpus.domain_id().to_string(),
        ));
    }
    Ok(())
}

fn evaluate(
    model: &crate::learner::LinearModel,
    test: &Corpus,
) -> Result<(Vec<Label>, Scores), SelfTrainError> {
    let mut counts = ConfusionCounts::new(Label::Positive, Label::Negative);
    let mut predictions = Vec::with_capacity(test.len());
    for doc in test.documents() {
        let gold = doc
            .label()
            .ok_or_else(|| SelfTrainError::UnlabeledCorpus(test.domain_id().to_string()))?;
        let pred = predict_linear(model, &FeatureVector::binary_from_document(doc));
        counts.add(gold, pred)?;
        predictions.push(pred);
    }
    let scores = counts.scores()?;
    Ok((predictions, scores))
}

/// Trains on `train`, evaluates on `test`; returns (macro-F1, accuracy) as
/// percentages.
pub fn run_baseline(
    train: &Corpus,
    test: &Corpus,
    params: &TrainParams,
) -> Result<(f64, f64), SelfTrainError> {
    require_labeled(train)?;
    require_labeled(test)?;
    let model = train_linear(&features_of(train), params)?;
    let (_, scores) = evaluate(&model, test)?;
    Ok((scores.macro_f1, scores.accuracy))
}

/// Trains the step-1 model of a setup. Sweeps cache the returned model per
/// training domain so each baseline trains once, not once per triple.
pub fn train_base_model(
    train: &Corpus,
    setup_seed: u64,
    params: &TrainParams,
) -> Result<crate::learner::LinearModel, SelfTrainError> {
    require_labeled(train)?;
    let mut train_params = *params;
    train_params.seed = setup_seed.wrapping_add(params.seed);
    Ok(train_linear(&features_of(train), &train_params)?)
}

/// Builds the concatenation of every domain other than `train` and `test`,
/// in sorted domain order, under the reserved BULK id.
pub fn bulk_corpus(
    corpora: &BTreeMap<String, Corpus>,
    train: &str,
    test: &str,
) -> Result<Corpus, SelfTrainError> {
    let parts: Vec<&Corpus> = corpora
        .iter()
        .filter(|(id, _)| id.as_str() != train && id.as_str() != test)
        .map(|(_, c)| c)
        .collect();
    if parts.is_empty() {
        return Err(SelfTrainError::TooFewDomains {
            needed: 3,
            got: corpora.len(),
        });
    }
    Ok(Corpus::concat(BULK_ID, parts))
}

/// FNV-1a over the setup id; used to derive per-setup significance seeds.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Derives a reproducible sub-seed from a base seed and a textual tag.
/// The hash is fixed (FNV-1a), so derived seeds are stable across runs and
/// builds.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    base ^ fnv1a(tag.as_bytes())
}

/// Runs the plain two-step self-training procedure.
///
/// Step 1 trains a model on the training corpus and labels the additional
/// corpus with it; step 2 retrains on the concatenation and evaluates on the
/// test corpus. Base scores come from the step-1 model on the same test
/// corpus. Gold labels of the additional corpus, when present, only feed the
/// pseudo-label-accuracy diagnostic.
pub fn self_train(
    setup: &SetupTriple,
    corpora: &BTreeMap<String, Corpus>,
    params: &ExperimentParams,
) -> Result<SelfTrainResult, SelfTrainError> {
    let train = corpora
        .get(&setup.train_domain)
        .ok_or_else(|| SelfTrainError::MissingCorpus(setup.train_domain.clone()))?;
    let base_model = train_base_model(train, setup.seed, &params.train)?;
    self_train_with_base(setup, corpora, params, &base_model)
}

/// [`self_train`] with a precomputed step-1 model, so sweeps can share one
/// base model across every triple with the same training domain.
pub fn self_train_with_base(
    setup: &SetupTriple,
    corpora: &BTreeMap<String, Corpus>,
    params: &ExperimentParams,
    base_model: &crate::learner::LinearModel,
) -> Result<SelfTrainResult, SelfTrainError> {
    let lookup = |id: &str| {
        corpora
            .get(id)
            .ok_or_else(|| SelfTrainError::MissingCorpus(id.to_string()))
    };
    let train = lookup(&setup.train_domain)?;
    let test = lookup(&setup.test_domain)?;
    require_labeled(train)?;
    require_labeled(test)?;

    let extra = match &setup.extra {
        ExtraSource::Domain(id) => lookup(id)?.clone(),
        ExtraSource::Bulk => bulk_corpus(corpora, &setup.train_domain, &setup.test_domain)?,
    };

    let mut train_params = params.train;
    train_params.seed = setup.seed.wrapping_add(params.train.seed);

    // Step 1: the base model labels the additional data.
    let (base_preds, base_scores) = evaluate(base_model, test)?;

    let mut pseudo_hits = 0usize;
    let mut pseudo_total = 0usize;
    let mut augmented = features_of(train);
    for doc in extra.documents() {
        let features = FeatureVector::binary_from_document(doc);
        let pseudo = predict_linear(base_model, &features);
        if let Some(gold) = doc.label() {
            pseudo_total += 1;
            if gold == pseudo {
                pseudo_hits += 1;
            }
        }
        augmented.push(FeatureVector::new(features.features().clone(), Some(pseudo)));
    }
    let pseudo_label_accuracy = if pseudo_total > 0 {
        Some(100.0 * pseudo_hits as f64 / pseudo_total as f64)
    } else {
        None
    };

    // Step 2: retrain on the concatenation, evaluate on the test corpus.
    let st_model = train_linear(&augmented, &train_params)?;
    let (st_preds, st_scores) = evaluate(&st_model, test)?;

    let p_value = if params.significance_iterations > 0 {
        let gold: Vec<Label> = test
            .documents()
            .iter()
            .map(|d| d.label().expect("test corpus validated as labeled"))
            .collect();
        Some(approx_randomization(
            &st_preds,
            &base_preds,
            &gold,
            Statistic::F1Diff,
            RandomizationMode::MonteCarlo {
                iterations: params.significance_iterations,
                seed: derive_seed(setup.seed, &setup.setup_id()),
            },
        )?)
    } else {
        None
    };

    let gain_label = if st_scores.macro_f1 > base_scores.macro_f1 {
        GainLabel::Gain
    } else {
        GainLabel::Loss
    };

    Ok(SelfTrainResult {
        setup: setup.clone(),
        base_f1: base_scores.macro_f1,
        st_f1: st_scores.macro_f1,
        base_acc: base_scores.accuracy,
        st_acc: st_scores.accuracy,
        gain_label,
        p_value,
        pseudo_label_accuracy,
    })
}

/// The three pairwise similarity values of a triple under one measure, as
/// stored in sweep records.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PairSims {
    pub test_train: f64,
    pub extra_train: f64,
    pub test_extra: f64,
}

/// All fifteen similarity values (five measures × three pairs) of a triple.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SimilarityBlock {
    pub cosine: PairSims,
    pub euclidean: PairSims,
    pub kl: PairSims,
    pub js: PairSims,
    pub suwr: PairSims,
}

impl SimilarityBlock {
    pub fn for_measure(&self, measure: Measure) -> &PairSims {
        match measure {
            Measure::Cosine => &self.cosine,
            Measure::Euclidean => &self.euclidean,
            Measure::Kl => &self.kl,
            Measure::Js => &self.js,
            Measure::Suwr => &self.suwr,
        }
    }

    pub fn for_measure_mut(&mut self, measure: Measure) -> &mut PairSims {
        match measure {
            Measure::Cosine => &mut self.cosine,
            Measure::Euclidean => &mut self.euclidean,
            Measure::Kl => &mut self.kl,
            Measure::Js => &mut self.js,
            Measure::Suwr => &mut self.suwr,
        }
    }
}

/// One line of the sweep's JSONL results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub setup_id: String,
    pub train: String,
    pub test: String,
    pub extra: String,
    pub seed: u64,
    pub base_f1: f64,
    pub st_f1: f64,
    pub base_acc: f64,
    pub st_acc: f64,
    pub gain: GainLabel,
    pub p_value: Option<f64>,
    pub pseudo_label_acc: Option<f64>,
    pub sim: SimilarityBlock,
}

impl SweepRecord {
    pub fn from_result(result: &SelfTrainResult, sim: SimilarityBlock) -> SweepRecord {
        SweepRecord {
            setup_id: result.setup.setup_id(),
            train: result.setup.train_domain.clone(),
            test: result.setup.test_domain.clone(),
            extra: result.setup.extra.as_str().to_string(),
            seed: result.setup.seed,
            base_f1: result.base_f1,
            st_f1: result.st_f1,
            base_acc: result.base_acc,
            st_acc: result.st_acc,
            gain: result.gain_label,
            p_value: result.p_value,
            pseudo_label_acc: result.pseudo_label_accuracy,
            sim,
        }
    }

    pub fn setup(&self) -> Result<SetupTriple, SelfTrainError> {
        let extra = if self.extra == BULK_ID {
            ExtraSource::Bulk
        } else {
            ExtraSource::Domain(self.extra.clone())
        };
        SetupTriple::new(self.train.clone(), self.test.clone(), extra, self.seed)
    }

    pub fn to_result(&self) -> Result<SelfTrainResult, SelfTrainError> {
        Ok(SelfTrainResult {
            setup: self.setup()?,
            base_f1: self.base_f1,
            st_f1: self.st_f1,
            base_acc: self.base_acc,
            st_acc: self.st_acc,
            gain_label: self.gain,
            p_value: self.p_value,
            pseudo_label_accuracy: self.pseudo_label_acc,
        })
    }

    pub fn is_bulk(&self) -> bool {
        self.extra == BULK_ID
    }
}

/// Reads every record of a JSONL results file.
pub fn read_records(path: &Path) -> Result<Vec<SweepRecord>, SelfTrainError> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| SelfTrainError::Io {
        path: display.clone(),
        source,
    })?;
    let reader = std::io::BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| SelfTrainError::Io {
            path: display.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record =
            serde_json::from_str(&line).map_err(|source| SelfTrainError::BadRecord {
                path: display.clone(),
                line: idx + 1,
                source,
            })?;
        records.push(record);
    }
    Ok(records)
}

/// Appends one record to a JSONL results file.
pub fn append_record(path: &Path, record: &SweepRecord) -> Result<(), SelfTrainError> {
    let display = path.display().to_string();
    let io_err = |source| SelfTrainError::Io {
        path: display.clone(),
        source,
    };
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err)?;
    let line = serde_json::to_string(record).expect("record serialization is infallible");
    writeln!(file, "{line}").map_err(io_err)
}

/// Rewrites a results file with records sorted by setup id, so repeated runs
/// produce byte-identical files.
pub fn write_records_sorted(path: &Path, records: &mut [SweepRecord]) -> Result<(), SelfTrainError> {
    records.sort_by(|a, b| a.setup_id.cmp(&b.setup_id));
    let display = path.display().to_string();
    let io_err = |source| SelfTrainError::Io {
        path: display.clone(),
        source,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    for record in records.iter() {
        let line = serde_json::to_string(record).expect("record serialization is infallible");
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}
