use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::GbtModel;
use super::objective::{grad_hess, log_loss, softmax};
use super::split::Features;
use super::tree::TreeBuilder;
use super::{GbtError, TrainConfig};
use crate::dataset::FibClassMap;
use crate::fusion::FeatureMatrix;

/// Per-round losses recorded during training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training cross-entropy after each round.
    pub train_loss: Vec<f64>,
    /// Mean validation cross-entropy after each round (empty without validation).
    pub valid_loss: Vec<f64>,
    pub rounds_completed: usize,
    pub best_round: usize,
    pub stopped_early: bool,
}

fn check_matrix(m: &FeatureMatrix, n_classes: usize) -> Result<(), GbtError> {
    if let Some(&label) = m.labels.iter().find(|&&l| l >= n_classes) {
        return Err(GbtError::LabelOutOfRange { label, classes: n_classes });
    }
    if let Some(k) = m.data.iter().position(|v| !v.is_finite()) {
        return Err(GbtError::NonFinite { row: k / m.n_cols.max(1) });
    }
    Ok(())
}

fn mean_loss(scores: &[f64], labels: &[usize], n_classes: usize) -> f64 {
    let total: f64 = scores
        .chunks_exact(n_classes)
        .zip(labels)
        .map(|(s, &y)| log_loss(s, y))
        .sum();
    total / labels.len() as f64
}

/// Fits one tree per class per round on the softmax cross-entropy.
///
/// With early stopping enabled, training halts once the validation loss has
/// not improved on its best value for `early_stopping_rounds` consecutive
/// rounds; `best_round` is the (1-based) round with the lowest validation
/// loss. Row and column sampling draw from a ChaCha8 stream seeded with
/// `config.seed`, so runs are reproducible.
pub fn train(
    train: &FeatureMatrix,
    valid: Option<&FeatureMatrix>,
    classes: &FibClassMap,
    config: &TrainConfig,
) -> Result<(GbtModel, TrainReport), GbtError> {
    config.validate()?;
    let n_classes = classes.len();
    let n = train.n_rows();
    if n == 0 {
        return Err(GbtError::EmptyTrainingSet);
    }
    check_matrix(train, n_classes)?;
    let valid = valid.filter(|v| v.n_rows() > 0);
    if config.early_stopping_rounds > 0 && valid.is_none() {
        return Err(GbtError::MissingValidation);
    }
    if let Some(v) = valid {
        if v.n_cols != train.n_cols {
            return Err(GbtError::DimensionMismatch { expected: train.n_cols, found: v.n_cols });
        }
        check_matrix(v, n_classes)?;
    }

    let x = Features::from(train);
    let eta = config.learning_rate;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut scores = vec![0.0; n * n_classes];
    let mut valid_scores = valid.map(|v| vec![0.0; v.n_rows() * n_classes]);
    let mut grad = vec![vec![0.0; n]; n_classes];
    let mut hess = vec![vec![0.0; n]; n_classes];

    let row_count = ((config.subsample * n as f64).round() as usize).clamp(1, n);
    let col_count = ((config.colsample_bytree * train.n_cols as f64).round() as usize).clamp(1, train.n_cols.max(1));

    let mut trees = Vec::new();
    let mut report = TrainReport {
        train_loss: Vec::new(),
        valid_loss: Vec::new(),
        rounds_completed: 0,
        best_round: 0,
        stopped_early: false,
    };
    let mut best_loss = f64::INFINITY;

    for round in 1..=config.n_estimators {
        for (i, s) in scores.chunks_exact(n_classes).enumerate() {
            let (g, h) = grad_hess(&softmax(s), train.labels[i]);
            for c in 0..n_classes {
                grad[c][i] = g[c];
                hess[c][i] = h[c];
            }
        }

        let mut round_trees = Vec::with_capacity(n_classes);
        for c in 0..n_classes {
            let rows: Vec<usize> = if row_count < n {
                let mut r = sample(&mut rng, n, row_count).into_vec();
                r.sort_unstable();
                r
            } else {
                (0..n).collect()
            };
            let features: Vec<usize> = if col_count < train.n_cols {
                let mut f = sample(&mut rng, train.n_cols, col_count).into_vec();
                f.sort_unstable();
                f
            } else {
                (0..train.n_cols).collect()
            };
            let tree = TreeBuilder {
                x,
                grad: &grad[c],
                hess: &hess[c],
                features: &features,
                params: config.split_params(),
                max_depth: config.max_depth,
            }
            .grow(rows)?;

            for (i, row) in train.rows().enumerate() {
                scores[i * n_classes + c] += eta * tree.predict(row);
            }
            if let (Some(v), Some(vs)) = (valid, valid_scores.as_mut()) {
                for (i, row) in v.rows().enumerate() {
                    vs[i * n_classes + c] += eta * tree.predict(row);
                }
            }
            round_trees.push(tree);
        }
        trees.push(round_trees);
        report.rounds_completed = round;
        report.train_loss.push(mean_loss(&scores, &train.labels, n_classes));

        if let (Some(v), Some(vs)) = (valid, valid_scores.as_ref()) {
            let loss = mean_loss(vs, &v.labels, n_classes);
            report.valid_loss.push(loss);
            if loss < best_loss {
                best_loss = loss;
                report.best_round = round;
            } else if config.early_stopping_rounds > 0 && round - report.best_round >= config.early_stopping_rounds {
                report.stopped_early = true;
                break;
            }
        }
    }
    if config.early_stopping_rounds == 0 {
        report.best_round = report.rounds_completed;
    }

    let model = GbtModel {
        config: config.clone(),
        column_names: train.column_names.clone(),
        normalization: None,
        fib_class_values: classes.clone(),
        num_classes: n_classes,
        rounds_completed: report.rounds_completed,
        best_round: report.best_round,
        trees,
    };
    Ok((model, report))
}
