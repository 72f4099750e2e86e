/// Softmax with the maximum subtracted before exponentiation.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Gradient and diagonal hessian of the cross-entropy with respect to the
/// class scores: `g_c = p_c - [c == y]`, `h_c = p_c (1 - p_c)`.
pub fn grad_hess(probs: &[f64], true_class: usize) -> (Vec<f64>, Vec<f64>) {
    let grad = probs
        .iter()
        .enumerate()
        .map(|(c, &p)| if c == true_class { p - 1.0 } else { p })
        .collect();
    let hess = probs.iter().map(|&p| p * (1.0 - p)).collect();
    (grad, hess)
}

/// Cross-entropy `-ln softmax(scores)[true_class]`, computed via log-sum-exp.
pub fn log_loss(scores: &[f64], true_class: usize) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    lse - scores[true_class]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_scores() {
        let p = softmax(&[0.0; 5]);
        for v in p {
            assert!((v - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn shift_invariance() {
        let s = [0.3, -1.2, 2.5, 0.0];
        let shifted: Vec<f64> = s.iter().map(|x| x + 7.0).collect();
        let (a, b) = (softmax(&s), softmax(&shifted));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn closed_form_two_class() {
        let p = softmax(&[2f64.ln(), 0.0]);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn large_scores_do_not_overflow() {
        let p = softmax(&[1000.0, 999.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(log_loss(&[1000.0, 999.0], 1).is_finite());
    }

    #[test]
    fn uniform_gradient() {
        let (g, h) = grad_hess(&[0.2; 5], 0);
        let expected = [-0.8, 0.2, 0.2, 0.2, 0.2];
        for (a, b) in g.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        for v in h {
            assert!((v - 0.16).abs() < 1e-15);
        }
    }

    #[test]
    fn perfect_prediction_has_zero_derivatives() {
        let (g, h) = grad_hess(&[1.0, 0.0, 0.0], 0);
        assert_eq!(g[0], 0.0);
        assert_eq!(h[0], 0.0);
    }

    #[test]
    fn log_loss_of_uniform() {
        assert!((log_loss(&[0.0; 5], 3) - 5f64.ln()).abs() < 1e-15);
    }
}
