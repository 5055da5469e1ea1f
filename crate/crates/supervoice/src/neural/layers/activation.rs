//! Leaky rectifier with a cached sign mask for the backward pass.

use crate::neural::tensor::{Scalar, Tensor};

/// Elementwise `max(x, slope * x)` for `0 < slope < 1`.
///
/// Each instance caches the mask of its most recent forward call, so a
/// network needs one instance per call site.
#[derive(Debug, Clone)]
pub struct LeakyRelu<F> {
    slope: F,
    mask: Vec<u8>,
}

impl<F: Scalar> LeakyRelu<F> {
    pub fn new(slope: f64) -> Self {
        assert!(slope > 0.0 && slope < 1.0, "slope must be in (0, 1)");
        LeakyRelu {
            slope: F::cast(slope),
            mask: Vec::new(),
        }
    }

    pub fn slope(&self) -> F {
        self.slope
    }

    pub fn forward(&mut self, x: &Tensor<F>) -> Tensor<F> {
        let mut y = x.clone();
        self.mask.clear();
        self.mask.reserve(x.len());
        for v in y.data_mut() {
            let positive = *v > F::zero();
            self.mask.push(positive as u8);
            if !positive {
                *v = *v * self.slope;
            }
        }
        y
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> Tensor<F> {
        assert_eq!(dy.len(), self.mask.len(), "backward before forward");
        let mut dx = dy.clone();
        for (d, &m) in dx.data_mut().iter_mut().zip(&self.mask) {
            if m == 0 {
                *d = *d * self.slope;
            }
        }
        dx
    }
}
