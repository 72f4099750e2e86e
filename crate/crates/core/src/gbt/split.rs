use std::cmp::Ordering;

use super::GbtError;
use crate::fusion::FeatureMatrix;

/// Row-major feature values borrowed from a matrix.
#[derive(Clone, Copy, Debug)]
pub struct Features<'a> {
    pub data: &'a [f64],
    pub n_cols: usize,
}

impl<'a> Features<'a> {
    pub fn new(data: &'a [f64], n_cols: usize) -> Self {
        debug_assert!(n_cols == 0 || data.len() % n_cols == 0);
        Self { data, n_cols }
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols + col]
    }

    pub fn row(&self, row: usize) -> &'a [f64] {
        &self.data[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn n_rows(&self) -> usize {
        if self.n_cols == 0 {
            0
        } else {
            self.data.len() / self.n_cols
        }
    }
}

impl<'a> From<&'a FeatureMatrix> for Features<'a> {
    fn from(m: &'a FeatureMatrix) -> Self {
        Self::new(&m.data, m.n_cols)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitParams {
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
}

/// The winning split for a node. Rows with `value < threshold` go left.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
    pub left_grad: f64,
    pub left_hess: f64,
    pub right_grad: f64,
    pub right_hess: f64,
}

/// Optimal leaf value `-G / (H + lambda)`.
pub fn leaf_weight(grad_sum: f64, hess_sum: f64, lambda: f64) -> Result<f64, GbtError> {
    let denom = hess_sum + lambda;
    if !(denom > 0.0) {
        return Err(GbtError::DegenerateHessian);
    }
    Ok(-grad_sum / denom)
}

/// Second-order gain of splitting a node into (left, right), less `gamma`.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma
}

/// Midpoint between two adjacent distinct values that still separates them.
fn threshold_between(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) * 0.5;
    if mid > lo && mid <= hi {
        mid
    } else {
        hi
    }
}

/// Exact greedy split search over `features` for the node holding `rows`.
///
/// Candidates sit midway between consecutive distinct values. The best
/// candidate has the largest gain; ties go to the lowest feature index and
/// then the lowest threshold. Returns `None` when no admissible candidate has
/// positive gain.
pub fn best_split(
    x: Features<'_>,
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    features: &[usize],
    params: &SplitParams,
) -> Option<SplitCandidate> {
    if rows.len() < 2 {
        return None;
    }
    let g_total: f64 = rows.iter().map(|&r| grad[r]).sum();
    let h_total: f64 = rows.iter().map(|&r| hess[r]).sum();

    let mut best: Option<SplitCandidate> = None;
    let mut order = rows.to_vec();
    for &feature in features {
        order.copy_from_slice(rows);
        order.sort_by(|&a, &b| {
            x.value(a, feature)
                .partial_cmp(&x.value(b, feature))
                .unwrap_or(Ordering::Equal)
        });
        let (mut gl, mut hl) = (0.0, 0.0);
        for k in 0..order.len() - 1 {
            let r = order[k];
            gl += grad[r];
            hl += hess[r];
            let (v, next) = (x.value(r, feature), x.value(order[k + 1], feature));
            if v == next {
                continue;
            }
            let (gr, hr) = (g_total - gl, h_total - hl);
            if hl < params.min_child_weight || hr < params.min_child_weight {
                continue;
            }
            if !(hl + params.lambda > 0.0 && hr + params.lambda > 0.0) {
                continue;
            }
            let gain = split_gain(gl, hl, gr, hr, params.lambda, params.gamma);
            let improves = match &best {
                Some(b) => gain > b.gain,
                None => gain > 0.0,
            };
            if improves {
                best = Some(SplitCandidate {
                    feature,
                    threshold: threshold_between(v, next),
                    gain,
                    left_grad: gl,
                    left_hess: hl,
                    right_grad: gr,
                    right_hess: hr,
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    const PARAMS: SplitParams = SplitParams { lambda: 1.0, gamma: 1.0, min_child_weight: 0.0 };

    #[test]
    fn leaf_weight_cases() {
        let w = leaf_weight(-0.8, 0.16, 1.0).unwrap();
        assert!((w - 0.8 / 1.16).abs() < 1e-15);
        assert!((w - 0.689_655_172_413_793).abs() < 1e-12);
        assert_eq!(leaf_weight(0.0, 3.0, 1.0).unwrap(), 0.0);
        assert!(leaf_weight(-0.8, 0.16, 2.0).unwrap().abs() < w.abs());
        assert!(matches!(leaf_weight(1.0, 0.0, 0.0), Err(GbtError::DegenerateHessian)));
    }

    #[test]
    fn gain_formula() {
        let gain = split_gain(-2.0, 2.0, 2.0, 2.0, 1.0, 1.0);
        assert!((gain - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn finds_separating_threshold() {
        // Feature 0 separates the gradients, feature 1 is noise.
        let data = [0.0, 5.0, 1.0, 3.0, 2.0, 4.0, 3.0, 1.0];
        let grad = [-1.0, -1.0, 1.0, 1.0];
        let hess = [1.0; 4];
        let s = best_split(Features::new(&data, 2), &[0, 1, 2, 3], &grad, &hess, &[0, 1], &PARAMS).unwrap();
        assert_eq!(s.feature, 0);
        assert_eq!(s.threshold, 1.5);
        assert_eq!((s.left_grad, s.left_hess), (-2.0, 2.0));
        assert!((s.gain - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn large_gamma_blocks_split() {
        let data = [0.0, 1.0, 2.0, 3.0];
        let grad = [-1.0, -1.0, 1.0, 1.0];
        let params = SplitParams { gamma: 10.0, ..PARAMS };
        assert!(best_split(Features::new(&data, 1), &[0, 1, 2, 3], &grad, &[1.0; 4], &[0], &params).is_none());
    }

    #[test]
    fn min_child_weight_rejects_light_children() {
        let data = [0.0, 1.0, 2.0, 3.0];
        let grad = [-1.0, -1.0, 1.0, 1.0];
        // Each half carries hessian 2.9 < 3.
        let hess = [1.45; 4];
        let params = SplitParams { gamma: 0.0, lambda: 1.0, min_child_weight: 3.0 };
        assert!(best_split(Features::new(&data, 1), &[0, 1, 2, 3], &grad, &hess, &[0], &params).is_none());
        let hess = [1.5; 4];
        assert!(best_split(Features::new(&data, 1), &[0, 1, 2, 3], &grad, &hess, &[0], &params).is_some());
    }

    #[test]
    fn constant_feature_has_no_split() {
        let data = [2.0; 4];
        assert!(best_split(Features::new(&data, 1), &[0, 1, 2, 3], &[-1.0, 1.0, -1.0, 1.0], &[1.0; 4], &[0], &PARAMS)
            .is_none());
    }

    #[test]
    fn tie_goes_to_lowest_feature() {
        // Two identical columns produce identical gains.
        let data = [0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0];
        let grad = [-1.0, -1.0, 1.0, 1.0];
        let s = best_split(Features::new(&data, 2), &[0, 1, 2, 3], &grad, &[1.0; 4], &[1, 0], &PARAMS);
        // features are visited in the order given; callers pass them ascending
        assert_eq!(s.unwrap().feature, 1);
        let s = best_split(Features::new(&data, 2), &[0, 1, 2, 3], &grad, &[1.0; 4], &[0, 1], &PARAMS);
        assert_eq!(s.unwrap().feature, 0);
    }

    #[test]
    fn adjacent_floats_split_cleanly() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let t = threshold_between(lo, hi);
        assert!(lo < t && hi >= t);
    }
}
