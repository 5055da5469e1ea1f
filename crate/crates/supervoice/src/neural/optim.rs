//! RMSprop parameter updates.

use super::tensor::{Param, Scalar};

/// RMSprop with the damping term added outside the square root:
///
/// ```text
/// v <- alpha * v + (1 - alpha) * g^2
/// theta <- theta - lr * g / (sqrt(v) + eps)
/// ```
///
/// State is keyed by visitation order, so the caller must pass parameters in
/// the same order every step (model traversal order is fixed).
#[derive(Debug, Clone)]
pub struct RmsProp<F> {
    pub lr: F,
    pub alpha: F,
    pub eps: F,
    state: Vec<Vec<F>>,
}

impl<F: Scalar> RmsProp<F> {
    pub fn new(lr: f64, alpha: f64, eps: f64) -> Self {
        assert!(lr >= 0.0);
        assert!((0.0..1.0).contains(&alpha));
        assert!(eps > 0.0);
        RmsProp {
            lr: F::cast(lr),
            alpha: F::cast(alpha),
            eps: F::cast(eps),
            state: Vec::new(),
        }
    }

    /// The defaults used for training: lr 0.001, alpha 0.95, eps 1e-7.
    pub fn default_training() -> Self {
        RmsProp::new(0.001, 0.95, 1e-7)
    }

    /// Applies one update to every parameter, in order.
    pub fn step(&mut self, params: &mut [(String, &mut Param<F>)]) {
        if self.state.is_empty() {
            self.state = params
                .iter()
                .map(|(_, p)| vec![F::zero(); p.value.len()])
                .collect();
        }
        assert_eq!(
            self.state.len(),
            params.len(),
            "parameter list changed between steps"
        );
        let one_minus = F::one() - self.alpha;
        for ((_, param), v) in params.iter_mut().zip(&mut self.state) {
            assert_eq!(v.len(), param.value.len(), "parameter shape changed");
            let grads = param.grad.data();
            let values = param.value.data_mut();
            for i in 0..values.len() {
                let g = grads[i];
                v[i] = self.alpha * v[i] + one_minus * g * g;
                values[i] = values[i] - self.lr * g / (v[i].sqrt() + self.eps);
            }
        }
    }
}
