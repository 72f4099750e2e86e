//! End-to-end runs: split, fuse, normalise, train, evaluate, and the paired
//! severity ablation.

use serde::{Deserialize, Serialize};

use crate::dataset::{stratified_indices, stratified_split, DatasetSplit, FibClassMap, SeverityScale, SplitWarning, StoryRecord};
use crate::eval::{ablation_compare, evaluate, AblationDiff, EvalReport, NEAR_MISS_TOLERANCE};
use crate::fusion::{apply_normalizer, fit_normalizer, fuse, EmbeddingRecord, FeatureMatrix};
use crate::gbt::{train, GbtModel, TrainConfig, TrainReport};
use crate::{Error, Result};

/// Everything that determines a run apart from the input files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub severity_scale: SeverityScale,
    pub fib_class_values: FibClassMap,
    pub test_fraction: f64,
    /// Share of the training split held out for early stopping.
    pub validation_fraction: f64,
    pub seed: u64,
    pub include_severity: bool,
    pub near_miss_tolerance: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            severity_scale: SeverityScale::Numeric,
            fib_class_values: FibClassMap::default(),
            test_fraction: 0.2,
            validation_fraction: 0.2,
            seed: 0,
            include_severity: true,
            near_miss_tolerance: NEAR_MISS_TOLERANCE,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        for (name, f) in [("test_fraction", self.test_fraction), ("validation_fraction", self.validation_fraction)] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!("{name} must lie strictly between 0 and 1, got {f}")));
            }
        }
        Ok(())
    }

    fn validation_seed(&self) -> u64 {
        self.seed.wrapping_add(0x9e37_79b9_7f4a_7c15)
    }
}

/// Seeded stratified train/test split of the corpus.
pub fn split_corpus(records: &[StoryRecord], config: &RunConfig) -> Result<(DatasetSplit, Vec<SplitWarning>)> {
    Ok(stratified_split(records, config.test_fraction, config.seed, &config.fib_class_values)?)
}

/// One test prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub story_id: String,
    pub actual_sp: u32,
    pub predicted_sp: u32,
}

/// A trained model with its training history and test-set evaluation.
#[derive(Clone, Debug)]
pub struct ArmResult {
    pub model: GbtModel,
    pub train_report: TrainReport,
    pub validation_ids: Vec<String>,
    pub report: EvalReport,
    pub predictions: Vec<Prediction>,
}

/// Fits a model on the training side of `split`.
///
/// When early stopping is on, a stratified share of the training rows is set
/// aside as the validation set. Normalisation is fit on the rows the trees
/// are grown from.
pub fn train_on_split(
    records: &[StoryRecord],
    embeddings: &[EmbeddingRecord],
    split: &DatasetSplit,
    config: &RunConfig,
    include_severity: bool,
) -> Result<(GbtModel, TrainReport, Vec<String>)> {
    config.validate()?;
    let matrix = fuse(records, embeddings, &config.severity_scale, &config.fib_class_values, include_severity)?;
    let train_rows = matrix.positions_of(&split.train)?;
    let train_all = matrix.select(&train_rows);

    let (fit, valid) = if config.train.early_stopping_rounds > 0 {
        let carve = stratified_indices(&train_all.labels, config.validation_fraction, config.validation_seed())?;
        (train_all.select(&carve.train), Some(train_all.select(&carve.test)))
    } else {
        (train_all, None)
    };
    let stats = fit_normalizer(&fit);
    let fit_z = apply_normalizer(&stats, &fit)?;
    let valid_z = valid.as_ref().map(|v| apply_normalizer(&stats, v)).transpose()?;
    let (mut model, report) = train(&fit_z, valid_z.as_ref(), &config.fib_class_values, &config.train)?;
    model.normalization = Some(stats);
    let validation_ids = valid.map(|v| v.story_ids).unwrap_or_default();
    Ok((model, report, validation_ids))
}

/// Predicts every row of a raw (unnormalised) matrix.
pub fn predict_matrix(model: &GbtModel, matrix: &FeatureMatrix) -> Result<Vec<usize>> {
    matrix
        .rows()
        .map(|row| Ok(model.predict_class(&model.prepare_row(row)?)?))
        .collect()
}

/// Evaluates `model` on the rows of `matrix` listed in `ids`.
pub fn evaluate_ids(
    model: &GbtModel,
    matrix: &FeatureMatrix,
    ids: &[String],
    config: &RunConfig,
) -> Result<(EvalReport, Vec<Prediction>)> {
    let rows = matrix.positions_of(ids)?;
    let subset = matrix.select(&rows);
    let preds = predict_matrix(model, &subset)?;
    let mut report = evaluate(&subset.labels, &preds, &model.fib_class_values, config.near_miss_tolerance)?;
    report.include_severity = Some(matrix.include_severity);
    report.test_ids = subset.story_ids.clone();
    let classes = &model.fib_class_values;
    let predictions = subset
        .story_ids
        .iter()
        .zip(subset.labels.iter().zip(&preds))
        .map(|(id, (&a, &p))| {
            Ok(Prediction { story_id: id.clone(), actual_sp: classes.class_to_sp(a)?, predicted_sp: classes.class_to_sp(p)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((report, predictions))
}

/// Trains on the split's training side and evaluates on its test side.
pub fn run_arm(
    records: &[StoryRecord],
    embeddings: &[EmbeddingRecord],
    split: &DatasetSplit,
    config: &RunConfig,
    include_severity: bool,
) -> Result<ArmResult> {
    let (model, train_report, validation_ids) = train_on_split(records, embeddings, split, config, include_severity)?;
    let matrix = fuse(records, embeddings, &config.severity_scale, &config.fib_class_values, include_severity)?;
    let (report, predictions) = evaluate_ids(&model, &matrix, &split.test, config)?;
    Ok(ArmResult { model, train_report, validation_ids, report, predictions })
}

/// Training history for one arm of an ablation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub include_severity: bool,
    pub n_features: usize,
    pub rounds_completed: usize,
    pub best_round: usize,
    pub stopped_early: bool,
    pub train_loss: Vec<f64>,
    pub valid_loss: Vec<f64>,
}

impl ArmSummary {
    fn of(arm: &ArmResult, include_severity: bool) -> Self {
        Self {
            include_severity,
            n_features: arm.model.n_features(),
            rounds_completed: arm.train_report.rounds_completed,
            best_round: arm.train_report.best_round,
            stopped_early: arm.train_report.stopped_early,
            train_loss: arm.train_report.train_loss.clone(),
            valid_loss: arm.train_report.valid_loss.clone(),
        }
    }
}

/// Actual story points next to both arms' predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedPrediction {
    pub story_id: String,
    pub actual_sp: u32,
    pub pred_with_severity: u32,
    pub pred_without_severity: u32,
}

/// Output of [`ablate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationOutcome {
    pub config: RunConfig,
    pub split: DatasetSplit,
    pub split_warnings: Vec<SplitWarning>,
    /// Both arms were trained, validated and tested on identical story ids.
    pub shared_split: bool,
    pub with_severity: ArmSummary,
    pub without_severity: ArmSummary,
    pub predictions: Vec<PairedPrediction>,
    pub diff: AblationDiff,
}

/// Trains and evaluates with and without the severity column over one split.
pub fn ablate(records: &[StoryRecord], embeddings: &[EmbeddingRecord], config: &RunConfig) -> Result<AblationOutcome> {
    config.validate()?;
    let (split, split_warnings) = split_corpus(records, config)?;
    let with = run_arm(records, embeddings, &split, config, true)?;
    let without = run_arm(records, embeddings, &split, config, false)?;
    let shared_split =
        with.report.test_ids == without.report.test_ids && with.validation_ids == without.validation_ids;
    if !shared_split {
        return Err(crate::eval::EvalError::MismatchedTestSets.into());
    }
    let diff = ablation_compare(&with.report, &without.report)?;
    let predictions = with
        .predictions
        .iter()
        .zip(&without.predictions)
        .map(|(a, b)| PairedPrediction {
            story_id: a.story_id.clone(),
            actual_sp: a.actual_sp,
            pred_with_severity: a.predicted_sp,
            pred_without_severity: b.predicted_sp,
        })
        .collect();
    Ok(AblationOutcome {
        config: config.clone(),
        split,
        split_warnings,
        shared_split,
        with_severity: ArmSummary::of(&with, true),
        without_severity: ArmSummary::of(&without, false),
        predictions,
        diff,
    })
}
