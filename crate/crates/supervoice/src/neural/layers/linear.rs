//! Fully connected layer.

use crate::neural::gemm::{axpy, dot8};
use crate::neural::tensor::{Param, Scalar, Tensor};
use crate::rng::SplitMix64;

/// `y = W x + b` applied row-wise to a `[batch, in_dim]` tensor.
#[derive(Debug, Clone)]
pub struct Linear<F> {
    pub weight: Param<F>,
    pub bias: Param<F>,
    in_dim: usize,
    out_dim: usize,
    cache: Option<Tensor<F>>,
}

impl<F: Scalar> Linear<F> {
    /// Weights drawn uniform in +-sqrt(1/in_dim), bias zero.
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut SplitMix64) -> Self {
        assert!(in_dim > 0 && out_dim > 0);
        let bound = (1.0 / in_dim as f64).sqrt();
        Linear {
            weight: Param::new(Tensor::uniform(&[out_dim, in_dim], bound, rng)),
            bias: Param::new(Tensor::zeros(&[out_dim])),
            in_dim,
            out_dim,
            cache: None,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn forward(&mut self, x: &Tensor<F>) -> Tensor<F> {
        let shape = x.shape();
        assert_eq!(shape.len(), 2, "expected [batch, features]");
        assert_eq!(shape[1], self.in_dim, "input feature count mismatch");
        let batch = shape[0];

        let mut y = Tensor::zeros(&[batch, self.out_dim]);
        for b in 0..batch {
            let xs = &x.data()[b * self.in_dim..(b + 1) * self.in_dim];
            let ys = &mut y.data_mut()[b * self.out_dim..(b + 1) * self.out_dim];
            for o in 0..self.out_dim {
                let ws = &self.weight.value.data()[o * self.in_dim..(o + 1) * self.in_dim];
                ys[o] = dot8(ws, xs) + self.bias.value.data()[o];
            }
        }
        self.cache = Some(x.clone());
        y
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> Tensor<F> {
        let x = self.cache.as_ref().expect("backward before forward");
        let batch = x.shape()[0];
        assert_eq!(dy.shape(), &[batch, self.out_dim]);

        let mut dx = Tensor::zeros(&[batch, self.in_dim]);
        for b in 0..batch {
            let xs = &x.data()[b * self.in_dim..(b + 1) * self.in_dim];
            let dys = &dy.data()[b * self.out_dim..(b + 1) * self.out_dim];
            let dxs = &mut dx.data_mut()[b * self.in_dim..(b + 1) * self.in_dim];
            for o in 0..self.out_dim {
                let g = dys[o];
                if g != F::zero() {
                    let ws = &self.weight.value.data()[o * self.in_dim..(o + 1) * self.in_dim];
                    axpy(dxs, g, ws);
                    let dws = &mut self.weight.grad.data_mut()[o * self.in_dim..(o + 1) * self.in_dim];
                    axpy(dws, g, xs);
                }
                self.bias.grad.data_mut()[o] = self.bias.grad.data()[o] + g;
            }
        }
        dx
    }

    pub fn params_mut(&mut self) -> Vec<(&'static str, &mut Param<F>)> {
        vec![("weight", &mut self.weight), ("bias", &mut self.bias)]
    }
}
