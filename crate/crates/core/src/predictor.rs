//! Self-training gain prediction: the unsupervised delta indicator, one-class
//! and history baselines, leave-one-out and tailored leave-one-out
//! cross-validation over similarity features, and the DOMAIN-vs-BULK grid.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::learner::{knn_predict, GainLabel, KnnModel, LearnerError};
use crate::metrics::{ConfusionCounts, MetricsError};
use crate::selftrain::{SelfTrainResult, SelfTrainError, SetupTriple, SweepRecord};
use crate::similarity::{Measure, SimilarityFeatures};

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("test/extra similarity must be positive for the delta indicator, got {0}")]
    UndefinedRatio(f64),
    #[error("similarity ratio plus tau is exactly zero; the indicator is undefined")]
    UndefinedIndicator,
    #[error("delta indicator undefined for setup `{setup_id}` under {measure}: {source}")]
    IndicatorFailed {
        setup_id: String,
        measure: Measure,
        #[source]
        source: Box<PredictorError>,
    },
    #[error("no prior result shares the (train={train}, test={test}) pair")]
    EmptyHistory { train: String, test: String },
    #[error("need at least {needed} results, got {got}")]
    TooFewResults { needed: usize, got: usize },
    #[error("result set is not a full sweep: {0}")]
    IncompleteCoverage(String),
    #[error("training partition for fold `{setup_id}` is empty after exclusions")]
    EmptyTrainingPartition { setup_id: String },
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    SelfTrain(#[from] SelfTrainError),
}

/// Configuration of the unsupervised delta indicator: the additive threshold
/// applied to the similarity ratio. −1.0 is the plain indicator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndicatorConfig {
    pub tau: f64,
}

impl Default for IndicatorConfig {
    fn default() -> IndicatorConfig {
        IndicatorConfig { tau: -1.0 }
    }
}

/// A prediction paired with the measured outcome of its setup.
#[derive(Debug, Clone, PartialEq)]
pub struct GainPrediction {
    pub setup: SetupTriple,
    pub predicted: GainLabel,
    pub actual: GainLabel,
    pub method: String,
}

impl GainPrediction {
    pub fn is_correct(&self) -> bool {
        self.predicted == self.actual
    }
}

/// Evaluates one baseline over a full result set, returning the individual
/// predictions. The confusion counts behind the report tables are the
/// aggregation of exactly these records.
pub fn baseline_predictions(
    kind: BaselineKind,
    results: &[SelfTrainResult],
) -> Result<Vec<GainPrediction>, PredictorError> {
    results
        .iter()
        .map(|result| {
            let predicted = baseline_predict(kind, &result.setup, results)?;
            Ok(GainPrediction {
                setup: result.setup.clone(),
                predicted,
                actual: result.gain_label,
                method: kind.name().to_string(),
            })
        })
        .collect()
}

/// Sign indicator over the ratio r = test_train / test_extra: GAIN when
/// r + tau > 0, LOSS when r + tau < 0. With tau = −1 this predicts gain
/// exactly when the additional data is closer to the test corpus than the
/// training corpus is.
pub fn delta_indicator(
    features: &SimilarityFeatures,
    cfg: &IndicatorConfig,
) -> Result<GainLabel, PredictorError> {
    if features.test_extra <= 0.0 || features.test_extra.is_nan() {
        return Err(PredictorError::UndefinedRatio(features.test_extra));
    }
    let ratio = features.test_train / features.test_extra;
    let shifted = ratio + cfg.tau;
    if shifted == 0.0 {
        return Err(PredictorError::UndefinedIndicator);
    }
    Ok(if shifted > 0.0 {
        GainLabel::Gain
    } else {
        GainLabel::Loss
    })
}

/// The four baseline predictors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    /// Always predict gain.
    Pos,
    /// Always predict loss.
    Neg,
    /// Gain iff at least one other result with the same (train, test) pair
    /// gained.
    Once,
    /// Gain iff strictly more than half of the other results with the same
    /// (train, test) pair gained; ties are loss.
    Maj,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [
        BaselineKind::Pos,
        BaselineKind::Neg,
        BaselineKind::Once,
        BaselineKind::Maj,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Pos => "POS",
            BaselineKind::Neg => "NEG",
            BaselineKind::Once => "ONCE",
            BaselineKind::Maj => "MAJ",
        }
    }
}

/// Predicts gain for `setup` from the history of measured results. ONCE and
/// MAJ consult results sharing the setup's (train, test) pair, excluding the
/// setup itself, and error when no such history exists.
pub fn baseline_predict(
    kind: BaselineKind,
    setup: &SetupTriple,
    history: &[SelfTrainResult],
) -> Result<GainLabel, PredictorError> {
    match kind {
        BaselineKind::Pos => Ok(GainLabel::Gain),
        BaselineKind::Neg => Ok(GainLabel::Loss),
        BaselineKind::Once | BaselineKind::Maj => {
            let matching: Vec<GainLabel> = history
                .iter()
                .filter(|r| r.setup != *setup)
                .filter(|r| {
                    r.setup.train_domain == setup.train_domain
                        && r.setup.test_domain == setup.test_domain
                })
                .map(|r| r.gain_label)
                .collect();
            if matching.is_empty() {
                return Err(PredictorError::EmptyHistory {
                    train: setup.train_domain.clone(),
                    test: setup.test_domain.clone(),
                });
            }
            let gains = matching.iter().filter(|&&g| g == GainLabel::Gain).count();
            let prediction = match kind {
                BaselineKind::Once => gains >= 1,
                BaselineKind::Maj => 2 * gains > matching.len(),
                _ => unreachable!(),
            };
            Ok(if prediction {
                GainLabel::Gain
            } else {
                GainLabel::Loss
            })
        }
    }
}

/// Which similarity values feed the kNN feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSet {
    /// test/train, extra/train and test/extra similarities.
    Three,
    /// Only the test/train similarity.
    TestTrainOnly,
}

fn record_features(record: &SweepRecord, measure: Measure, set: FeatureSet) -> Vec<f64> {
    let sims = record.sim.for_measure(measure);
    match set {
        FeatureSet::Three => vec![sims.test_train, sims.extra_train, sims.test_extra],
        FeatureSet::TestTrainOnly => vec![sims.test_train],
    }
}

/// Plain leave-one-out cross-validation: every result is predicted by a kNN
/// model trained on all other results.
pub fn loo_cv(
    records: &[SweepRecord],
    measure: Measure,
    feature_set: FeatureSet,
    k: usize,
) -> Result<ConfusionCounts<GainLabel>, PredictorError> {
    if records.len() < 2 {
        return Err(PredictorError::TooFewResults {
            needed: 2,
            got: records.len(),
        });
    }
    let mut counts = ConfusionCounts::new(GainLabel::Gain, GainLabel::Loss);
    for (i, record) in records.iter().enumerate() {
        let instances: Vec<(Vec<f64>, GainLabel)> = records
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, r)| (record_features(r, measure, feature_set), r.gain))
            .collect();
        let model = KnnModel::new(instances, k)?;
        let predicted = knn_predict(&model, &record_features(record, measure, feature_set))?;
        counts.add(record.gain, predicted)?;
    }
    Ok(counts)
}

/// Indices of the records allowed in the training partition of the fold whose
/// test instance is `records[test_index]`.
///
/// Excluded are (1) every record whose triple contains the test instance's
/// extra domain in any role and (2) every record whose triple contains both
/// the test instance's train and test domains in any roles.
pub fn tailored_partition(records: &[SweepRecord], test_index: usize) -> Vec<usize> {
    let fold = &records[test_index];
    let contains = |r: &SweepRecord, domain: &str| {
        r.train == domain || r.test == domain || r.extra == domain
    };
    records
        .iter()
        .enumerate()
        .filter(|&(j, r)| {
            j != test_index
                && !contains(r, &fold.extra)
                && !(contains(r, &fold.train) && contains(r, &fold.test))
        })
        .map(|(j, _)| j)
        .collect()
}

/// Validates that `records` form one complete DOMAIN sweep: no BULK rows,
/// every ordered triple of distinct domains exactly once. Returns the sorted
/// domain list.
pub fn validate_domain_coverage(records: &[SweepRecord]) -> Result<Vec<String>, PredictorError> {
    let mut domains: BTreeSet<&str> = BTreeSet::new();
    for record in records {
        if record.is_bulk() {
            return Err(PredictorError::IncompleteCoverage(
                "BULK records mixed into a DOMAIN result set".into(),
            ));
        }
        domains.insert(&record.train);
        domains.insert(&record.test);
        domains.insert(&record.extra);
    }
    let d = domains.len();
    if d < 3 {
        return Err(PredictorError::IncompleteCoverage(format!(
            "only {d} distinct domains"
        )));
    }
    let expected = d * (d - 1) * (d - 2);
    let mut triples = BTreeSet::new();
    for record in records {
        if !triples.insert((&record.train, &record.test, &record.extra)) {
            return Err(PredictorError::IncompleteCoverage(format!(
                "duplicate triple {}",
                record.setup_id
            )));
        }
    }
    if triples.len() != expected {
        return Err(PredictorError::IncompleteCoverage(format!(
            "{} triples over {d} domains, expected {expected}",
            triples.len()
        )));
    }
    Ok(domains.into_iter().map(String::from).collect())
}

/// Tailored leave-one-out cross-validation: like [`loo_cv`] but each fold's
/// training partition drops every record sharing the test instance's extra
/// domain or its (train, test) pair, so no fold can lean on results for the
/// same corpus combination.
pub fn tailored_loo_cv(
    records: &[SweepRecord],
    measure: Measure,
    feature_set: FeatureSet,
    k: usize,
) -> Result<ConfusionCounts<GainLabel>, PredictorError> {
    validate_domain_coverage(records)?;
    let mut counts = ConfusionCounts::new(GainLabel::Gain, GainLabel::Loss);
    for (i, record) in records.iter().enumerate() {
        let partition = tailored_partition(records, i);
        if partition.is_empty() {
            return Err(PredictorError::EmptyTrainingPartition {
                setup_id: record.setup_id.clone(),
            });
        }
        let instances: Vec<(Vec<f64>, GainLabel)> = partition
            .into_iter()
            .map(|j| {
                (
                    record_features(&records[j], measure, feature_set),
                    records[j].gain,
                )
            })
            .collect();
        let model = KnnModel::new(instances, k)?;
        let predicted = knn_predict(&model, &record_features(record, measure, feature_set))?;
        counts.add(record.gain, predicted)?;
    }
    Ok(counts)
}

/// Category of one (train, test) cell of the DOMAIN-vs-BULK grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellCategory {
    /// Gain under both the DOMAIN and the BULK approach.
    Both,
    /// Gain only when a single selected domain is added.
    DomainOnly,
    /// Gain only when the concatenation of all other domains is added.
    BulkOnly,
    /// No gain either way.
    None,
}

impl CellCategory {
    pub fn name(self) -> &'static str {
        match self {
            CellCategory::Both => "BOTH",
            CellCategory::DomainOnly => "DOMAIN_ONLY",
            CellCategory::BulkOnly => "BULK_ONLY",
            CellCategory::None => "NONE",
        }
    }
}

/// The DOMAIN-vs-BULK comparison grid over all ordered (train, test) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct BulkGrid {
    domains: Vec<String>,
    cells: BTreeMap<(String, String), CellCategory>,
}

impl BulkGrid {
    pub fn domains(&self) -> &[String] {
        &self.domains
    }

    pub fn cell(&self, train: &str, test: &str) -> Option<CellCategory> {
        self.cells
            .get(&(train.to_string(), test.to_string()))
            .copied()
    }

    pub fn cells(&self) -> impl Iterator<Item = (&(String, String), &CellCategory)> {
        self.cells.iter()
    }

    /// CSV rendering: rows are train domains, columns test domains, the
    /// diagonal is empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("train");
        for test in &self.domains {
            out.push(',');
            out.push_str(test);
        }
        out.push('\n');
        for train in &self.domains {
            out.push_str(train);
            for test in &self.domains {
                out.push(',');
                if train != test {
                    let cell = self.cells[&(train.clone(), test.clone())];
                    out.push_str(cell.name());
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Builds the grid: a (train, test) pair is DOMAIN-positive when at least one
/// of its triples gained, BULK-positive when its single BULK experiment
/// gained.
pub fn bulk_grid(
    domain_records: &[SweepRecord],
    bulk_records: &[SweepRecord],
) -> Result<BulkGrid, PredictorError> {
    let domains = validate_domain_coverage(domain_records)?;
    let d = domains.len();

    let mut bulk_gain: BTreeMap<(String, String), GainLabel> = BTreeMap::new();
    for record in bulk_records {
        if !record.is_bulk() {
            return Err(PredictorError::IncompleteCoverage(format!(
                "non-BULK record {} in the BULK result set",
                record.setup_id
            )));
        }
        if !domains.contains(&record.train) || !domains.contains(&record.test) {
            return Err(PredictorError::IncompleteCoverage(format!(
                "BULK record {} uses a domain outside the DOMAIN sweep",
                record.setup_id
            )));
        }
        if bulk_gain
            .insert((record.train.clone(), record.test.clone()), record.gain)
            .is_some()
        {
            return Err(PredictorError::IncompleteCoverage(format!(
                "duplicate BULK pair {}",
                record.setup_id
            )));
        }
    }
    if bulk_gain.len() != d * (d - 1) {
        return Err(PredictorError::IncompleteCoverage(format!(
            "{} BULK pairs over {d} domains, expected {}",
            bulk_gain.len(),
            d * (d - 1)
        )));
    }

    let mut domain_positive: BTreeMap<(String, String), bool> = BTreeMap::new();
    for record in domain_records {
        let entry = domain_positive
            .entry((record.train.clone(), record.test.clone()))
            .or_insert(false);
        *entry |= record.gain == GainLabel::Gain;
    }

    let mut cells = BTreeMap::new();
    for train in &domains {
        for test in &domains {
            if train == test {
                continue;
            }
            let key = (train.clone(), test.clone());
            let dom = domain_positive[&key];
            let bulk = bulk_gain[&key] == GainLabel::Gain;
            let category = match (dom, bulk) {
                (true, true) => CellCategory::Both,
                (true, false) => CellCategory::DomainOnly,
                (false, true) => CellCategory::BulkOnly,
                (false, false) => CellCategory::None,
            };
            cells.insert(key, category);
        }
    }
    Ok(BulkGrid { domains, cells })
}

/// One row of a prediction-performance report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub name: String,
    pub precision_on_gain: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
}

impl ReportRow {
    fn from_counts(name: &str, counts: &ConfusionCounts<GainLabel>) -> Result<ReportRow, PredictorError> {
        let scores = counts.scores()?;
        Ok(ReportRow {
            name: name.to_string(),
            precision_on_gain: scores.positive.precision,
            macro_f1: scores.macro_f1,
            accuracy: scores.accuracy,
        })
    }
}

/// Renders report rows as CSV with two-decimal percentages.
pub fn rows_to_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("type,precision_on_gain,macro_f1,accuracy\n");
    for row in rows {
        out.push_str(&format!(
            "{},{:.2},{:.2},{:.2}\n",
            row.name, row.precision_on_gain, row.macro_f1, row.accuracy
        ));
    }
    out
}

/// Unsupervised report: one row per measure, predictions by the delta
/// indicator at the configured tau.
pub fn unsup_report(
    records: &[SweepRecord],
    measures: &[Measure],
    cfg: &IndicatorConfig,
) -> Result<Vec<ReportRow>, PredictorError> {
    let mut rows = Vec::new();
    for &measure in measures {
        let mut counts = ConfusionCounts::new(GainLabel::Gain, GainLabel::Loss);
        for record in records {
            let sims = record.sim.for_measure(measure);
            let features = SimilarityFeatures {
                measure,
                test_train: sims.test_train,
                extra_train: sims.extra_train,
                test_extra: sims.test_extra,
            };
            let predicted =
                delta_indicator(&features, cfg).map_err(|e| PredictorError::IndicatorFailed {
                    setup_id: record.setup_id.clone(),
                    measure,
                    source: Box::new(e),
                })?;
            counts.add(record.gain, predicted)?;
        }
        rows.push(ReportRow::from_counts(measure.name(), &counts)?);
    }
    Ok(rows)
}

/// Supervised leave-one-out report: one row per measure.
pub fn loo_report(
    records: &[SweepRecord],
    measures: &[Measure],
    feature_set: FeatureSet,
    k: usize,
) -> Result<Vec<ReportRow>, PredictorError> {
    measures
        .iter()
        .map(|&m| ReportRow::from_counts(m.name(), &loo_cv(records, m, feature_set, k)?))
        .collect()
}

/// Tailored leave-one-out report: one row per measure.
pub fn tailored_report(
    records: &[SweepRecord],
    measures: &[Measure],
    feature_set: FeatureSet,
    k: usize,
) -> Result<Vec<ReportRow>, PredictorError> {
    measures
        .iter()
        .map(|&m| ReportRow::from_counts(m.name(), &tailored_loo_cv(records, m, feature_set, k)?))
        .collect()
}

/// Baseline report: POS, NEG, ONCE and MAJ rows. ONCE and MAJ evaluate each
/// record against the rest of the result set.
pub fn baselines_report(records: &[SweepRecord]) -> Result<Vec<ReportRow>, PredictorError> {
    let results: Vec<SelfTrainResult> = records
        .iter()
        .map(SweepRecord::to_result)
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for kind in BaselineKind::ALL {
        let mut counts = ConfusionCounts::new(GainLabel::Gain, GainLabel::Loss);
        for prediction in baseline_predictions(kind, &results)? {
            counts.add(prediction.actual, prediction.predicted)?;
        }
        rows.push(ReportRow::from_counts(kind.name(), &counts)?);
    }
    Ok(rows)
}
