//! Finite-difference gradient checking.
//!
//! The loss closure may run in any float width; differences are always taken
//! in f64 using the actually-representable perturbed values, which keeps the
//! numerical noise floor low enough to check f32 layers meaningfully.

use super::tensor::Scalar;

/// Central-difference gradient of `f` with respect to each coordinate of
/// `x`. The step for coordinate i is `h_base * max(1, |x_i|)`; `x` is
/// restored to its original contents before returning.
pub fn central_diff<F: Scalar>(
    f: &mut dyn FnMut(&[F]) -> f64,
    x: &mut [F],
    h_base: f64,
) -> Vec<f64> {
    assert!(h_base > 0.0);
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = x[i];
        let h = h_base * orig.into_f64().abs().max(1.0);
        let plus = F::cast(orig.into_f64() + h);
        let minus = F::cast(orig.into_f64() - h);
        x[i] = plus;
        let f_plus = f(x);
        x[i] = minus;
        let f_minus = f(x);
        x[i] = orig;
        // Divide by the spacing the float type actually realized.
        let spacing = plus.into_f64() - minus.into_f64();
        grad.push((f_plus - f_minus) / spacing);
    }
    grad
}

/// Largest elementwise relative error between an analytic gradient and a
/// numeric one. Each denominator is floored to keep near-zero entries from
/// dominating: `|a - n| / max(|a|, |n|, floor)`.
pub fn max_rel_error<F: Scalar>(analytic: &[F], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    assert!(floor > 0.0);
    let mut worst = 0.0f64;
    for (&a, &n) in analytic.iter().zip(numeric) {
        let a = a.into_f64();
        let denom = a.abs().max(n.abs()).max(floor);
        let err = (a - n).abs() / denom;
        if err > worst {
            worst = err;
        }
    }
    worst
}
