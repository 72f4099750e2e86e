//! Classification metrics over story-point classes.
//!
//! Precision, recall and F1 follow the usual one-vs-rest definitions with a
//! zero denominator mapped to 0. Near-miss accuracy counts a prediction as
//! correct when it lies within `rank_tolerance` positions of the true class
//! on the ordered story-point scale.

mod fixture;

pub use fixture::{parse_table5, table5, Table5Row, TABLE5_JSONL};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetError, FibClassMap};

/// Default near-miss window: one step along the story-point scale.
pub const NEAR_MISS_TOLERANCE: usize = 1;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{actual} actual labels but {predicted} predictions")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("class index {index} out of range for {classes} classes")]
    IndexOutOfRange { index: usize, classes: usize },
    #[error("reports cover different test instances")]
    MismatchedTestSets,
    #[error("line {line}: malformed fixture row: {message}")]
    MalformedFixture { line: usize, message: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `counts[actual][predicted]`, with rows and columns labelled by story point.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<u32>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|c| self.counts[c][c]).sum()
    }

    /// Instances whose actual class is `c`.
    pub fn support(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    /// Instances predicted as `c`.
    pub fn predicted(&self, c: usize) -> u64 {
        self.counts.iter().map(|row| row[c]).sum()
    }

    pub fn render(&self) -> String {
        let mut out = String::from("actual\\pred");
        for l in &self.labels {
            let _ = write!(out, " {l:>5}");
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.counts) {
            let _ = write!(out, "{l:>11}");
            for v in row {
                let _ = write!(out, " {v:>5}");
            }
            out.push('\n');
        }
        out
    }
}

fn check_inputs(actuals: &[usize], preds: &[usize], n_classes: usize) -> Result<(), EvalError> {
    if actuals.len() != preds.len() {
        return Err(EvalError::LengthMismatch { actual: actuals.len(), predicted: preds.len() });
    }
    if let Some(&index) = actuals.iter().chain(preds).find(|&&i| i >= n_classes) {
        return Err(EvalError::IndexOutOfRange { index, classes: n_classes });
    }
    Ok(())
}

pub fn confusion(actuals: &[usize], preds: &[usize], classes: &FibClassMap) -> Result<ConfusionMatrix, EvalError> {
    let n = classes.len();
    check_inputs(actuals, preds, n)?;
    let mut counts = vec![vec![0u64; n]; n];
    for (&a, &p) in actuals.iter().zip(preds) {
        counts[a][p] += 1;
    }
    Ok(ConfusionMatrix { labels: classes.values().to_vec(), counts })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    /// Story-point value of the class.
    pub class: u32,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn per_class_metrics(m: &ConfusionMatrix) -> Vec<ClassMetrics> {
    (0..m.n_classes())
        .map(|c| {
            let tp = m.counts[c][c];
            let precision = ratio(tp, m.predicted(c));
            let recall = ratio(tp, m.support(c));
            ClassMetrics { class: m.labels[c], precision, recall, f1: harmonic(precision, recall), support: m.support(c) }
        })
        .collect()
}

/// Unweighted mean over classes that occur as an actual or predicted label,
/// and the support-weighted mean over all classes.
pub fn averages(m: &ConfusionMatrix, per_class: &[ClassMetrics]) -> (Averages, Averages) {
    let present: Vec<&ClassMetrics> = per_class
        .iter()
        .enumerate()
        .filter(|(c, _)| m.support(*c) > 0 || m.predicted(*c) > 0)
        .map(|(_, pc)| pc)
        .collect();
    let k = present.len() as f64;
    let macro_avg = if present.is_empty() {
        Averages::default()
    } else {
        Averages {
            precision: present.iter().map(|c| c.precision).sum::<f64>() / k,
            recall: present.iter().map(|c| c.recall).sum::<f64>() / k,
            f1: present.iter().map(|c| c.f1).sum::<f64>() / k,
        }
    };
    let total = m.total() as f64;
    let weighted = if total == 0.0 {
        Averages::default()
    } else {
        let w = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(|c| f(c) * c.support as f64).sum::<f64>() / total;
        Averages { precision: w(|c| c.precision), recall: w(|c| c.recall), f1: w(|c| c.f1) }
    };
    (macro_avg, weighted)
}

/// Fraction of instances on the diagonal; 0 for an empty matrix.
pub fn accuracy(m: &ConfusionMatrix) -> f64 {
    ratio(m.trace(), m.total())
}

/// Number of predictions within `rank_tolerance` classes of the truth.
pub fn near_miss_count(actuals: &[usize], preds: &[usize], rank_tolerance: usize) -> usize {
    actuals.iter().zip(preds).filter(|(a, p)| a.abs_diff(**p) <= rank_tolerance).count()
}

pub fn near_miss_accuracy(actuals: &[usize], preds: &[usize], rank_tolerance: usize) -> Result<f64, EvalError> {
    if actuals.len() != preds.len() {
        return Err(EvalError::LengthMismatch { actual: actuals.len(), predicted: preds.len() });
    }
    Ok(ratio(near_miss_count(actuals, preds, rank_tolerance) as u64, actuals.len() as u64))
}

/// Metrics for one set of predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub include_severity: Option<bool>,
    pub n_instances: usize,
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub near_miss_accuracy: f64,
    pub near_miss_tolerance: usize,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub confusion: ConfusionMatrix,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub test_ids: Vec<String>,
}

/// Builds a report from class-index labels and predictions.
pub fn evaluate(
    actuals: &[usize],
    preds: &[usize],
    classes: &FibClassMap,
    rank_tolerance: usize,
) -> Result<EvalReport, EvalError> {
    let m = confusion(actuals, preds, classes)?;
    let per_class = per_class_metrics(&m);
    let (macro_avg, weighted_avg) = averages(&m, &per_class);
    Ok(EvalReport {
        include_severity: None,
        n_instances: actuals.len(),
        per_class,
        accuracy: accuracy(&m),
        near_miss_accuracy: near_miss_accuracy(actuals, preds, rank_tolerance)?,
        near_miss_tolerance: rank_tolerance,
        macro_avg,
        weighted_avg,
        confusion: m,
        test_ids: Vec::new(),
    })
}

/// Like [`evaluate`], with labels given as story-point values.
pub fn evaluate_story_points(
    actual_sp: &[u32],
    pred_sp: &[u32],
    classes: &FibClassMap,
    rank_tolerance: usize,
) -> Result<EvalReport, EvalError> {
    let to_class = |v: &[u32]| {
        v.iter()
            .map(|&sp| classes.sp_to_class(i64::from(sp)))
            .collect::<Result<Vec<_>, _>>()
    };
    evaluate(&to_class(actual_sp)?, &to_class(pred_sp)?, classes, rank_tolerance)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassDelta {
    pub class: u32,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Differences `without - with` for each metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricDeltas {
    pub accuracy: f64,
    pub near_miss_accuracy: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub per_class: Vec<ClassDelta>,
}

/// Paired reports from the same test instances, with and without severity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationDiff {
    pub with_severity: EvalReport,
    pub without_severity: EvalReport,
    pub deltas: MetricDeltas,
}

pub fn ablation_compare(with: &EvalReport, without: &EvalReport) -> Result<AblationDiff, EvalError> {
    let same_classes = with.per_class.len() == without.per_class.len()
        && with
            .per_class
            .iter()
            .zip(&without.per_class)
            .all(|(a, b)| a.class == b.class && a.support == b.support);
    if !same_classes || with.n_instances != without.n_instances || with.test_ids != without.test_ids {
        return Err(EvalError::MismatchedTestSets);
    }
    let per_class = with
        .per_class
        .iter()
        .zip(&without.per_class)
        .map(|(a, b)| ClassDelta {
            class: a.class,
            precision: b.precision - a.precision,
            recall: b.recall - a.recall,
            f1: b.f1 - a.f1,
        })
        .collect();
    Ok(AblationDiff {
        with_severity: with.clone(),
        without_severity: without.clone(),
        deltas: MetricDeltas {
            accuracy: without.accuracy - with.accuracy,
            near_miss_accuracy: without.near_miss_accuracy - with.near_miss_accuracy,
            macro_f1: without.macro_avg.f1 - with.macro_avg.f1,
            weighted_f1: without.weighted_avg.f1 - with.weighted_avg.f1,
            per_class,
        },
    })
}

impl AblationDiff {
    /// Side-by-side table of per-class precision/recall/F1 and the summary
    /// accuracies, two decimals.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<12} | {:^22} | {:^22} | {:>7}", "story points", "with severity", "without severity", "F1 diff");
        let _ = writeln!(out, "{:<12} | {:>6} {:>6} {:>8} | {:>6} {:>6} {:>8} |", "", "P", "R", "F1", "P", "R", "F1");
        for ((a, b), d) in self
            .with_severity
            .per_class
            .iter()
            .zip(&self.without_severity.per_class)
            .zip(&self.deltas.per_class)
        {
            let _ = writeln!(
                out,
                "{:<12} | {:>6.2} {:>6.2} {:>8.2} | {:>6.2} {:>6.2} {:>8.2} | {:>+7.2}",
                a.class, a.precision, a.recall, a.f1, b.precision, b.recall, b.f1, d.f1
            );
        }
        let (w, wo) = (&self.with_severity, &self.without_severity);
        let rows = [
            ("accuracy", w.accuracy, wo.accuracy, self.deltas.accuracy),
            ("near-miss", w.near_miss_accuracy, wo.near_miss_accuracy, self.deltas.near_miss_accuracy),
            ("macro F1", w.macro_avg.f1, wo.macro_avg.f1, self.deltas.macro_f1),
            ("weighted F1", w.weighted_avg.f1, wo.weighted_avg.f1, self.deltas.weighted_f1),
        ];
        for (name, a, b, d) in rows {
            let _ = writeln!(out, "{name:<12} | {a:>22.2} | {b:>22.2} | {d:>+7.2}");
        }
        out
    }
}
