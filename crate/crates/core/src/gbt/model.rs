use serde::{Deserialize, Serialize};

use super::objective::softmax;
use super::tree::TreeNode;
use super::{GbtError, TrainConfig};
use crate::dataset::FibClassMap;
use crate::fusion::NormalizationStats;

/// A trained ensemble: `trees[round][class]`.
///
/// Predictions use the first `best_round` rounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub config: TrainConfig,
    pub column_names: Vec<String>,
    #[serde(default)]
    pub normalization: Option<NormalizationStats>,
    pub fib_class_values: FibClassMap,
    pub num_classes: usize,
    pub rounds_completed: usize,
    pub best_round: usize,
    pub trees: Vec<Vec<TreeNode>>,
}

impl GbtModel {
    pub fn n_features(&self) -> usize {
        self.column_names.len()
    }

    pub fn learning_rate(&self) -> f64 {
        self.config.learning_rate
    }

    fn check_row(&self, row: &[f64]) -> Result<(), GbtError> {
        if row.len() != self.n_features() {
            return Err(GbtError::DimensionMismatch { expected: self.n_features(), found: row.len() });
        }
        Ok(())
    }

    /// Per-class scores for a row already in model space (normalised).
    pub fn predict_scores(&self, row: &[f64]) -> Result<Vec<f64>, GbtError> {
        self.check_row(row)?;
        let used = &self.trees[..self.best_round.min(self.trees.len())];
        Ok((0..self.num_classes)
            .map(|c| self.learning_rate() * used.iter().map(|round| round[c].predict(row)).sum::<f64>())
            .collect())
    }

    /// Argmax of the scores; ties go to the lowest class index.
    pub fn predict_class(&self, row: &[f64]) -> Result<usize, GbtError> {
        Ok(argmax(&self.predict_scores(row)?))
    }

    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>, GbtError> {
        Ok(softmax(&self.predict_scores(row)?))
    }

    /// Applies the stored normalisation (if any) to a raw fused row.
    pub fn prepare_row(&self, raw: &[f64]) -> Result<Vec<f64>, GbtError> {
        self.check_row(raw)?;
        match &self.normalization {
            Some(stats) => stats
                .apply_row(raw)
                .map_err(|_| GbtError::DimensionMismatch { expected: stats.n_cols(), found: raw.len() }),
            None => Ok(raw.to_vec()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, GbtError> {
        let model: GbtModel = serde_json::from_str(text).map_err(|e| GbtError::Malformed(e.to_string()))?;
        model.check_consistency()?;
        Ok(model)
    }

    fn check_consistency(&self) -> Result<(), GbtError> {
        let malformed = |m: String| Err(GbtError::Malformed(m));
        if self.num_classes != self.fib_class_values.len() {
            return malformed(format!(
                "num_classes {} does not match {} class values",
                self.num_classes,
                self.fib_class_values.len()
            ));
        }
        if self.trees.len() != self.rounds_completed {
            return malformed(format!("{} tree rounds stored, {} declared", self.trees.len(), self.rounds_completed));
        }
        if self.best_round > self.rounds_completed {
            return malformed("best_round exceeds rounds_completed".into());
        }
        for round in &self.trees {
            if round.len() != self.num_classes {
                return malformed("each round must hold one tree per class".into());
            }
            if round.iter().filter_map(TreeNode::max_feature).any(|f| f >= self.n_features()) {
                return malformed("tree references a feature beyond the column list".into());
            }
        }
        if let Some(stats) = &self.normalization {
            if stats.n_cols() != self.n_features() || stats.std.len() != stats.n_cols() {
                return malformed("normalisation width differs from the column list".into());
            }
        }
        Ok(())
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(trees: Vec<Vec<TreeNode>>, best_round: usize) -> GbtModel {
        GbtModel {
            config: TrainConfig { learning_rate: 0.5, ..Default::default() },
            column_names: vec!["a".into()],
            normalization: None,
            fib_class_values: FibClassMap::new(vec![1, 2]).unwrap(),
            num_classes: 2,
            rounds_completed: trees.len(),
            best_round,
            trees,
        }
    }

    #[test]
    fn zero_rounds_predict_class_zero() {
        let m = model(vec![], 0);
        assert_eq!(m.predict_scores(&[1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(m.predict_class(&[1.0]).unwrap(), 0);
    }

    #[test]
    fn single_tree_contributes_eta_times_weight() {
        let leaf = |w| TreeNode::Leaf { weight: w };
        let m = model(vec![vec![leaf(0.0), leaf(3.0)]], 1);
        assert_eq!(m.predict_scores(&[0.0]).unwrap(), vec![0.0, 1.5]);
        assert_eq!(m.predict_class(&[0.0]).unwrap(), 1);
    }

    #[test]
    fn rounds_past_best_are_ignored() {
        let leaf = |w| TreeNode::Leaf { weight: w };
        let m = model(vec![vec![leaf(1.0), leaf(0.0)], vec![leaf(0.0), leaf(9.0)]], 1);
        assert_eq!(m.predict_class(&[0.0]).unwrap(), 0);
    }

    #[test]
    fn dimension_mismatch() {
        let m = model(vec![], 0);
        assert!(matches!(m.predict_scores(&[1.0, 2.0]), Err(GbtError::DimensionMismatch { .. })));
    }

    #[test]
    fn rejects_inconsistent_json() {
        let leaf = |w| TreeNode::Leaf { weight: w };
        let mut m = model(vec![vec![leaf(1.0), leaf(0.0)]], 1);
        m.rounds_completed = 3;
        assert!(GbtModel::from_json(&m.to_json()).is_err());
        assert!(GbtModel::from_json("{}").is_err());
    }

    #[test]
    fn argmax_tie_break() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }
}
