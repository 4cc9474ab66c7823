//! Evaluation arithmetic shared by the labeling and prediction experiments:
//! confusion counts, accuracy, per-class precision/recall/F1, macro-F1, and
//! approximate randomization significance testing.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::Label;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no evaluated items")]
    EmptyCounts,
    #[error("label `{0}` is not one of the two classes of this confusion matrix")]
    ForeignLabel(String),
    #[error("prediction lists have different lengths ({a} vs {b} vs gold {gold})")]
    LengthMismatch { a: usize, b: usize, gold: usize },
    #[error("randomization needs at least one item")]
    EmptyInput,
    #[error("randomization needs at least one iteration")]
    ZeroIterations,
    #[error("exact enumeration supports at most {max} items, got {got}")]
    ExactTooLarge { max: usize, got: usize },
}

/// 2x2 confusion counts over an ordered (gold, predicted) class pair.
///
/// The first class passed to [`ConfusionCounts::new`] is the designated
/// positive class for precision/recall reporting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionCounts<L> {
    classes: [L; 2],
    // counts[gold][pred], indexed by class position.
    counts: [[u64; 2]; 2],
}

impl<L: Copy + Eq + std::fmt::Debug> ConfusionCounts<L> {
    pub fn new(positive: L, negative: L) -> ConfusionCounts<L> {
        ConfusionCounts {
            classes: [positive, negative],
            counts: [[0; 2]; 2],
        }
    }

    fn index(&self, label: L) -> Result<usize, MetricsError> {
        self.classes
            .iter()
            .position(|&c| c == label)
            .ok_or_else(|| MetricsError::ForeignLabel(format!("{label:?}")))
    }

    pub fn add(&mut self, gold: L, predicted: L) -> Result<(), MetricsError> {
        let g = self.index(gold)?;
        let p = self.index(predicted)?;
        self.counts[g][p] += 1;
        Ok(())
    }

    pub fn count(&self, gold: L, predicted: L) -> u64 {
        let g = self.index(gold).expect("class checked by caller");
        let p = self.index(predicted).expect("class checked by caller");
        self.counts[g][p]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Associative merge, used when confusion counts are accumulated across
    /// independently evaluated folds.
    pub fn merge(&mut self, other: &ConfusionCounts<L>) {
        assert_eq!(self.classes, other.classes, "merging incompatible counts");
        for g in 0..2 {
            for p in 0..2 {
                self.counts[g][p] += other.counts[g][p];
            }
        }
    }

    /// Standard scores, as percentages in [0, 100].
    ///
    /// A class with no predicted items has precision 0, a class with no gold
    /// items has recall 0, and F1 is 0 whenever precision + recall is 0.
    /// Macro-F1 is the unweighted mean of the two class F1 values.
    pub fn scores(&self) -> Result<Scores, MetricsError> {
        let total = self.total();
        if total == 0 {
            return Err(MetricsError::EmptyCounts);
        }
        let class_scores = |c: usize| {
            let predicted: u64 = self.counts[0][c] + self.counts[1][c];
            let gold: u64 = self.counts[c][0] + self.counts[c][1];
            let hit = self.counts[c][c];
            let precision = if predicted == 0 {
                0.0
            } else {
                hit as f64 / predicted as f64
            };
            let recall = if gold == 0 { 0.0 } else { hit as f64 / gold as f64 };
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            PerClass {
                precision: 100.0 * precision,
                recall: 100.0 * recall,
                f1: 100.0 * f1,
            }
        };
        let positive = class_scores(0);
        let negative = class_scores(1);
        let diagonal = self.counts[0][0] + self.counts[1][1];
        Ok(Scores {
            accuracy: 100.0 * diagonal as f64 / total as f64,
            macro_f1: 0.5 * (positive.f1 + negative.f1),
            positive,
            negative,
        })
    }
}

/// Precision/recall/F1 for one class, as percentages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerClass {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Score summary of a 2x2 confusion matrix, as percentages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub accuracy: f64,
    pub positive: PerClass,
    pub negative: PerClass,
    pub macro_f1: f64,
}

/// Test statistic compared between two systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    /// Difference in macro-averaged F1.
    F1Diff,
    /// Difference in accuracy.
    AccDiff,
}

/// How the randomization distribution is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandomizationMode {
    /// Enumerate all 2^n swap patterns; limited to n ≤ 20.
    Exact,
    /// Sample swap patterns with a seeded RNG; the p-value uses add-one
    /// smoothing: (exceedances + 1) / (iterations + 1).
    MonteCarlo { iterations: u32, seed: u64 },
}

const EXACT_LIMIT: usize = 20;

fn statistic_value(pred: &[Label], gold: &[Label], statistic: Statistic) -> f64 {
    let mut counts = ConfusionCounts::new(Label::Positive, Label::Negative);
    for (&p, &g) in pred.iter().zip(gold) {
        counts.add(g, p).expect("sentiment labels");
    }
    let scores = counts.scores().expect("non-empty predictions");
    match statistic {
        Statistic::F1Diff => scores.macro_f1,
        Statistic::AccDiff => scores.accuracy,
    }
}

/// Two-sided approximate randomization test for the difference of a score
/// between two systems evaluated on the same gold labels.
///
/// Each randomization swaps `pred_a[i]` and `pred_b[i]` independently with
/// probability one half and recomputes the statistic difference; the p-value
/// is the fraction of randomizations at least as extreme as the observed
/// difference.
pub fn approx_randomization(
    pred_a: &[Label],
    pred_b: &[Label],
    gold: &[Label],
    statistic: Statistic,
    mode: RandomizationMode,
) -> Result<f64, MetricsError> {
    if pred_a.len() != pred_b.len() || pred_a.len() != gold.len() {
        return Err(MetricsError::LengthMismatch {
            a: pred_a.len(),
            b: pred_b.len(),
            gold: gold.len(),
        });
    }
    let n = gold.len();
    if n == 0 {
        return Err(MetricsError::EmptyInput);
    }
    let observed =
        (statistic_value(pred_a, gold, statistic) - statistic_value(pred_b, gold, statistic)).abs();

    let mut swapped_a = pred_a.to_vec();
    let mut swapped_b = pred_b.to_vec();
    let mut randomized_stat = |swap: &mut dyn FnMut(usize) -> bool| {
        for i in 0..n {
            if swap(i) {
                swapped_a[i] = pred_b[i];
                swapped_b[i] = pred_a[i];
            } else {
                swapped_a[i] = pred_a[i];
                swapped_b[i] = pred_b[i];
            }
        }
        (statistic_value(&swapped_a, gold, statistic)
            - statistic_value(&swapped_b, gold, statistic))
        .abs()
    };

    match mode {
        RandomizationMode::Exact => {
            if n > EXACT_LIMIT {
                return Err(MetricsError::ExactTooLarge {
                    max: EXACT_LIMIT,
                    got: n,
                });
            }
            let patterns: u64 = 1 << n;
            let stats: Vec<f64> = (0..patterns)
                .map(|mask| randomized_stat(&mut |i| mask >> i & 1 == 1))
                .collect();
            Ok(tail_count(&stats, observed) as f64 / patterns as f64)
        }
        RandomizationMode::MonteCarlo { iterations, seed } => {
            if iterations == 0 {
                return Err(MetricsError::ZeroIterations);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let stats: Vec<f64> = (0..iterations)
                .map(|_| {
                    // Draw the whole pattern first so RNG consumption per
                    // iteration is independent of the statistic.
                    let flips: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
                    randomized_stat(&mut |i| flips[i])
                })
                .collect();
            Ok((tail_count(&stats, observed) as f64 + 1.0) / (f64::from(iterations) + 1.0))
        }
    }
}

/// Number of randomized statistics at least as extreme as the observed one.
/// For a fixed randomization stream this is non-increasing in `observed`.
fn tail_count(randomized: &[f64], observed: f64) -> u64 {
    randomized.iter().filter(|&&s| s >= observed).count() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_arithmetic_for_one_class_baselines() {
        // 106 gold-positive, 1610 gold-negative items.
        let mut all_neg = ConfusionCounts::new(Label::Positive, Label::Negative);
        for _ in 0..106 {
            all_neg.add(Label::Positive, Label::Negative).unwrap();
        }
        for _ in 0..1610 {
            all_neg.add(Label::Negative, Label::Negative).unwrap();
        }
        let s = all_neg.scores().unwrap();
        assert_eq!(s.positive.precision, 0.0);
        assert!((s.macro_f1 - 48.41).abs() < 0.01, "{}", s.macro_f1);
        assert!((s.accuracy - 93.82).abs() < 0.01, "{}", s.accuracy);

        let mut all_pos = ConfusionCounts::new(Label::Positive, Label::Negative);
        for _ in 0..106 {
            all_pos.add(Label::Positive, Label::Positive).unwrap();
        }
        for _ in 0..1610 {
            all_pos.add(Label::Negative, Label::Positive).unwrap();
        }
        let s = all_pos.scores().unwrap();
        assert!((s.positive.precision - 6.18).abs() < 0.01);
        assert!((s.macro_f1 - 5.82).abs() < 0.01, "{}", s.macro_f1);
        assert!((s.accuracy - 6.18).abs() < 0.01);
    }

    #[test]
    fn perfect_predictor_scores_100() {
        let mut c = ConfusionCounts::new(Label::Positive, Label::Negative);
        c.add(Label::Positive, Label::Positive).unwrap();
        c.add(Label::Negative, Label::Negative).unwrap();
        let s = c.scores().unwrap();
        assert_eq!(s.accuracy, 100.0);
        assert_eq!(s.macro_f1, 100.0);
    }

    #[test]
    fn empty_counts_error() {
        let c = ConfusionCounts::new(Label::Positive, Label::Negative);
        assert!(matches!(c.scores(), Err(MetricsError::EmptyCounts)));
    }

    #[test]
    fn accuracy_is_diagonal_over_total() {
        let mut c = ConfusionCounts::new(Label::Positive, Label::Negative);
        c.add(Label::Positive, Label::Positive).unwrap();
        c.add(Label::Positive, Label::Negative).unwrap();
        c.add(Label::Negative, Label::Negative).unwrap();
        c.add(Label::Negative, Label::Negative).unwrap();
        let s = c.scores().unwrap();
        assert_eq!(s.accuracy, 100.0 * 3.0 / 4.0);
    }

    #[test]
    fn macro_f1_is_invariant_under_class_relabeling() {
        let golds = [
            Label::Positive,
            Label::Positive,
            Label::Negative,
            Label::Negative,
            Label::Negative,
        ];
        let preds = [
            Label::Positive,
            Label::Negative,
            Label::Negative,
            Label::Positive,
            Label::Negative,
        ];
        let mut c = ConfusionCounts::new(Label::Positive, Label::Negative);
        let mut swapped = ConfusionCounts::new(Label::Positive, Label::Negative);
        for (&g, &p) in golds.iter().zip(&preds) {
            c.add(g, p).unwrap();
            swapped.add(g.flipped(), p.flipped()).unwrap();
        }
        let a = c.scores().unwrap();
        let b = swapped.scores().unwrap();
        assert!((a.macro_f1 - b.macro_f1).abs() < 1e-12);
        assert!((a.accuracy - b.accuracy).abs() < 1e-12);
    }

    #[test]
    fn merge_adds_counts() {
        let mut a = ConfusionCounts::new(Label::Positive, Label::Negative);
        a.add(Label::Positive, Label::Positive).unwrap();
        let mut b = ConfusionCounts::new(Label::Positive, Label::Negative);
        b.add(Label::Negative, Label::Positive).unwrap();
        a.merge(&b);
        assert_eq!(a.total(), 2);
        assert_eq!(a.count(Label::Negative, Label::Positive), 1);
    }

    #[test]
    fn identical_predictions_give_p_one() {
        let preds = vec![Label::Positive, Label::Negative, Label::Positive];
        let gold = vec![Label::Positive, Label::Positive, Label::Negative];
        for mode in [
            RandomizationMode::Exact,
            RandomizationMode::MonteCarlo {
                iterations: 99,
                seed: 1,
            },
        ] {
            let p = approx_randomization(&preds, &preds, &gold, Statistic::F1Diff, mode).unwrap();
            assert_eq!(p, 1.0);
        }
    }

    /// Independent exhaustive enumeration of all swap patterns.
    fn exact_oracle(
        pred_a: &[Label],
        pred_b: &[Label],
        gold: &[Label],
        statistic: Statistic,
    ) -> f64 {
        let n = gold.len();
        let observed = (statistic_value(pred_a, gold, statistic)
            - statistic_value(pred_b, gold, statistic))
        .abs();
        let mut exceed = 0u64;
        for mask in 0u64..(1 << n) {
            let a: Vec<Label> = (0..n)
                .map(|i| if mask >> i & 1 == 1 { pred_b[i] } else { pred_a[i] })
                .collect();
            let b: Vec<Label> = (0..n)
                .map(|i| if mask >> i & 1 == 1 { pred_a[i] } else { pred_b[i] })
                .collect();
            let s = (statistic_value(&a, gold, statistic) - statistic_value(&b, gold, statistic))
                .abs();
            if s >= observed {
                exceed += 1;
            }
        }
        exceed as f64 / (1u64 << n) as f64
    }

    #[test]
    fn exact_mode_matches_exhaustive_enumeration_n3() {
        let pred_a = vec![Label::Positive, Label::Positive, Label::Negative];
        let pred_b = vec![Label::Negative, Label::Positive, Label::Positive];
        let gold = vec![Label::Positive, Label::Positive, Label::Negative];
        for statistic in [Statistic::F1Diff, Statistic::AccDiff] {
            let p = approx_randomization(
                &pred_a,
                &pred_b,
                &gold,
                statistic,
                RandomizationMode::Exact,
            )
            .unwrap();
            let expect = exact_oracle(&pred_a, &pred_b, &gold, statistic);
            assert_eq!(p, expect);
        }
    }

    #[test]
    fn exact_mode_rejects_large_inputs() {
        let preds = vec![Label::Positive; 21];
        let err = approx_randomization(
            &preds,
            &preds,
            &preds,
            Statistic::AccDiff,
            RandomizationMode::Exact,
        )
        .unwrap_err();
        assert!(matches!(err, MetricsError::ExactTooLarge { .. }));
    }

    #[test]
    fn length_mismatch_errors() {
        let a = vec![Label::Positive];
        let b = vec![Label::Positive, Label::Negative];
        let err = approx_randomization(
            &a,
            &b,
            &b,
            Statistic::AccDiff,
            RandomizationMode::Exact,
        )
        .unwrap_err();
        assert!(matches!(err, MetricsError::LengthMismatch { .. }));
    }

    #[test]
    fn tail_is_monotone_in_observed_magnitude() {
        // With a fixed randomization stream, a larger observed difference
        // can only shrink the tail.
        let stats = [0.0, 3.5, 1.25, 7.0, 0.5, 3.5, 2.0];
        let mut previous = None;
        for observed in [0.0, 0.5, 1.0, 3.5, 3.6, 7.0, 8.0] {
            let count = tail_count(&stats, observed);
            if let Some(prev) = previous {
                assert!(count <= prev, "tail grew from {prev} to {count}");
            }
            previous = Some(count);
        }
        assert_eq!(tail_count(&stats, 0.0), 7);
        assert_eq!(tail_count(&stats, 8.0), 0);
    }

    #[test]
    fn p_value_stays_in_unit_interval() {
        let gold: Vec<Label> = (0..8)
            .map(|i| if i % 2 == 0 { Label::Positive } else { Label::Negative })
            .collect();
        let pred_a: Vec<Label> = (0..8)
            .map(|i| if i < 6 { gold[i] } else { gold[i].flipped() })
            .collect();
        let pred_b: Vec<Label> = (0..8).map(|i| gold[i].flipped()).collect();
        let p = approx_randomization(
            &pred_a,
            &pred_b,
            &gold,
            Statistic::AccDiff,
            RandomizationMode::Exact,
        )
        .unwrap();
        assert!(p > 0.0 && p <= 1.0);
    }
}
