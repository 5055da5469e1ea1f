//! Softmax cross-entropy over class logits.

use crate::neural::tensor::{Scalar, Tensor};

/// Row-wise softmax with the usual max-shift for stability.
pub fn softmax_rows<F: Scalar>(logits: &Tensor<F>) -> Tensor<F> {
    let shape = logits.shape();
    assert_eq!(shape.len(), 2, "expected [batch, classes]");
    let (batch, classes) = (shape[0], shape[1]);
    let mut out = Tensor::zeros(shape);
    for b in 0..batch {
        let zs = &logits.data()[b * classes..(b + 1) * classes];
        let mut max = zs[0];
        for &z in zs {
            if z > max {
                max = z;
            }
        }
        let os = &mut out.data_mut()[b * classes..(b + 1) * classes];
        let mut sum = F::zero();
        for (o, &z) in os.iter_mut().zip(zs) {
            *o = (z - max).exp();
            sum = sum + *o;
        }
        for o in os.iter_mut() {
            *o = *o / sum;
        }
    }
    out
}

/// Index of the largest logit per row; first index wins ties.
pub fn argmax_rows<F: Scalar>(logits: &Tensor<F>) -> Vec<usize> {
    let shape = logits.shape();
    assert_eq!(shape.len(), 2);
    let (batch, classes) = (shape[0], shape[1]);
    (0..batch)
        .map(|b| {
            let zs = &logits.data()[b * classes..(b + 1) * classes];
            let mut best = 0;
            for (i, &z) in zs.iter().enumerate() {
                if z > zs[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Mean negative log-likelihood and its gradient with respect to the logits.
/// The gradient is `(softmax - onehot) / batch`, so a downstream backward
/// pass needs no further scaling.
pub fn softmax_cross_entropy<F: Scalar>(logits: &Tensor<F>, labels: &[usize]) -> (F, Tensor<F>) {
    let shape = logits.shape();
    assert_eq!(shape.len(), 2, "expected [batch, classes]");
    let (batch, classes) = (shape[0], shape[1]);
    assert_eq!(labels.len(), batch, "one label per row");
    assert!(batch > 0);
    for &l in labels {
        assert!(l < classes, "label {l} out of range for {classes} classes");
    }

    let probs = softmax_rows(logits);
    let inv_batch = F::one() / F::cast(batch as f64);
    let mut dlogits = probs.clone();
    let mut loss = F::zero();
    for (b, &label) in labels.iter().enumerate() {
        // log p = (z_label - max) - ln(sum exp(z - max)); the sum is >= 1,
        // so this stays finite even when the label probability underflows.
        let zs = &logits.data()[b * classes..(b + 1) * classes];
        let mut max = zs[0];
        for &z in zs {
            if z > max {
                max = z;
            }
        }
        let mut sum = F::zero();
        for &z in zs {
            sum = sum + (z - max).exp();
        }
        loss = loss + sum.ln() - (zs[label] - max);

        let row = &mut dlogits.data_mut()[b * classes..(b + 1) * classes];
        row[label] = row[label] - F::one();
        for v in row.iter_mut() {
            *v = *v * inv_batch;
        }
    }
    (loss * inv_batch, dlogits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_classes() {
        let logits = Tensor::from_vec(&[2, 4], vec![3.0f64; 8]);
        let (loss, _) = softmax_cross_entropy(&logits, &[0, 3]);
        assert!((loss - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_prediction_has_near_zero_loss() {
        let logits = Tensor::from_vec(&[1, 3], vec![20.0f64, 0.0, 0.0]);
        let (loss, _) = softmax_cross_entropy(&logits, &[0]);
        assert!(loss < 1e-8);
    }

    #[test]
    fn gradient_rows_sum_to_zero_and_point_away_from_the_label() {
        let logits = Tensor::from_vec(&[1, 3], vec![1.0f64, 2.0, 0.5]);
        let (_, d) = softmax_cross_entropy(&logits, &[2]);
        let row_sum: f64 = d.data().iter().sum();
        assert!(row_sum.abs() < 1e-12);
        assert!(d.data()[2] < 0.0, "label logit is pushed up");
        assert!(d.data()[0] > 0.0 && d.data()[1] > 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use crate::neural::gradcheck::{central_diff, max_rel_error};
        let logits = Tensor::from_vec(&[2, 3], vec![0.3f64, -1.2, 0.8, 2.0, 0.1, -0.4]);
        let labels = [1usize, 0];
        let (_, analytic) = softmax_cross_entropy(&logits, &labels);
        let mut probe = logits.clone();
        let numeric = central_diff(
            &mut |vals| {
                let (loss, _) = softmax_cross_entropy(
                    &Tensor::from_vec(&[2, 3], vals.to_vec()),
                    &labels,
                );
                loss
            },
            probe.data_mut(),
            1e-6,
        );
        assert!(max_rel_error(analytic.data(), &numeric, 1e-8) < 1e-7);
    }

    #[test]
    fn extreme_logits_stay_finite() {
        let logits = Tensor::from_vec(&[1, 2], vec![1000.0f64, -1000.0]);
        let (loss, d) = softmax_cross_entropy(&logits, &[1]);
        // The label probability underflows to zero, but the log-sum-exp
        // route still reports the true 2000-nat loss.
        assert!((loss - 2000.0).abs() < 1e-9);
        assert!(d.all_finite());
    }

    #[test]
    fn argmax_breaks_ties_toward_the_first_class() {
        let logits = Tensor::from_vec(&[1, 3], vec![5.0f64, 5.0, 1.0]);
        assert_eq!(argmax_rows(&logits), vec![0]);
    }
}
