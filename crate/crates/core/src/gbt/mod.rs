//! Gradient-boosted decision trees with a softmax multiclass objective.
//!
//! Each boosting round fits one regression tree per class on the first and
//! second derivatives of the multiclass cross-entropy. A class score is the
//! learning rate times the sum of that class's tree outputs, and the
//! predicted class is the argmax of the scores.
//!
//! Split search is exact: every boundary between sorted unique values of a
//! feature is scored with the regularised second-order gain, and candidates
//! that leave a child with less hessian mass than `min_child_weight` are
//! skipped.

mod model;
mod objective;
mod split;
mod train;
mod tree;

pub use model::GbtModel;
pub use objective::{grad_hess, log_loss, softmax};
pub use split::{best_split, leaf_weight, split_gain, Features, SplitCandidate, SplitParams};
pub use train::{train, TrainReport};
pub use tree::TreeNode;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum GbtError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("early stopping needs a non-empty validation set")]
    MissingValidation,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("row has {found} features, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite feature value in row {row}")]
    NonFinite { row: usize },
    #[error("hessian sum plus lambda must be positive")]
    DegenerateHessian,
    #[error("malformed model: {0}")]
    Malformed(String),
}

/// Boosting hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Maximum number of boosting rounds.
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// Fraction of rows drawn (without replacement) for each tree.
    pub subsample: f64,
    /// Fraction of columns drawn for each tree.
    pub colsample_bytree: f64,
    /// Minimum gain a split must exceed.
    pub gamma: f64,
    /// Minimum hessian sum in each child.
    pub min_child_weight: f64,
    /// L2 penalty on leaf weights.
    pub reg_lambda: f64,
    /// Stop after this many rounds without validation improvement; 0 disables.
    pub early_stopping_rounds: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_estimators: 75,
            max_depth: 4,
            learning_rate: 0.1,
            subsample: 1.0,
            colsample_bytree: 1.0,
            gamma: 1.0,
            min_child_weight: 3.0,
            reg_lambda: 1.0,
            early_stopping_rounds: 15,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GbtError> {
        let fail = |msg: &str| Err(GbtError::InvalidConfig(msg.to_string()));
        if self.n_estimators < 1 {
            return fail("n_estimators must be at least 1");
        }
        if self.max_depth < 1 {
            return fail("max_depth must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return fail("learning_rate must lie in (0, 1]");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return fail("subsample must lie in (0, 1]");
        }
        if !(self.colsample_bytree > 0.0 && self.colsample_bytree <= 1.0) {
            return fail("colsample_bytree must lie in (0, 1]");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return fail("gamma must be a finite non-negative number");
        }
        if !(self.min_child_weight >= 0.0 && self.min_child_weight.is_finite()) {
            return fail("min_child_weight must be a finite non-negative number");
        }
        if !(self.reg_lambda >= 0.0 && self.reg_lambda.is_finite()) {
            return fail("reg_lambda must be a finite non-negative number");
        }
        Ok(())
    }

    pub(crate) fn split_params(&self) -> SplitParams {
        SplitParams { lambda: self.reg_lambda, gamma: self.gamma, min_child_weight: self.min_child_weight }
    }
}
