//! Layer normalization over each sample's full feature map.
//!
//! Statistics are taken across every channel and spatial position of one
//! sample, then a per-channel affine pair (gamma, beta) is applied. This is
//! the convolutional flavor of layer norm: the normalization ignores batch
//! statistics entirely, so inference on a single window behaves exactly like
//! training.

use crate::neural::tensor::{Param, Scalar, Tensor};

#[derive(Debug, Clone)]
pub struct LayerNorm<F> {
    pub gamma: Param<F>,
    pub beta: Param<F>,
    channels: usize,
    eps: F,
    cache: Option<NormCache<F>>,
}

#[derive(Debug, Clone)]
struct NormCache<F> {
    normalized: Tensor<F>,
    inv_std: Vec<F>,
    spatial: usize,
}

impl<F: Scalar> LayerNorm<F> {
    pub fn new(channels: usize) -> Self {
        assert!(channels > 0);
        let mut gamma = Tensor::zeros(&[channels]);
        gamma.fill(F::one());
        let beta = Tensor::zeros(&[channels]);
        LayerNorm {
            gamma: Param::new(gamma),
            beta: Param::new(beta),
            channels,
            eps: F::cast(1e-5),
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Input shape `[batch, channels, spatial...]`; any number of trailing
    /// spatial dimensions, including none.
    pub fn forward(&mut self, x: &Tensor<F>) -> Tensor<F> {
        let shape = x.shape();
        assert!(shape.len() >= 2, "need a batch and a channel dimension");
        assert_eq!(shape[1], self.channels, "channel count mismatch");
        let batch = shape[0];
        let spatial: usize = shape[2..].iter().product();
        let features = self.channels * spatial;
        assert!(features > 0);

        let mut y = Tensor::zeros(shape);
        let mut normalized = Tensor::zeros(shape);
        let mut inv_std = Vec::with_capacity(batch);
        let n = F::cast(features as f64);

        for b in 0..batch {
            let xs = &x.data()[b * features..(b + 1) * features];
            let mut mean = F::zero();
            for &v in xs {
                mean = mean + v;
            }
            mean = mean / n;
            let mut var = F::zero();
            for &v in xs {
                let d = v - mean;
                var = var + d * d;
            }
            var = var / n;
            let inv = F::one() / (var + self.eps).sqrt();
            inv_std.push(inv);

            let ns = &mut normalized.data_mut()[b * features..(b + 1) * features];
            for (dst, &v) in ns.iter_mut().zip(xs) {
                *dst = (v - mean) * inv;
            }
            let ys = &mut y.data_mut()[b * features..(b + 1) * features];
            for c in 0..self.channels {
                let g = self.gamma.value.data()[c];
                let be = self.beta.value.data()[c];
                for s in 0..spatial {
                    let i = c * spatial + s;
                    ys[i] = g * normalized.data()[b * features + i] + be;
                }
            }
        }

        self.cache = Some(NormCache {
            normalized,
            inv_std,
            spatial,
        });
        y
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> Tensor<F> {
        let cache = self.cache.as_ref().expect("backward before forward");
        let spatial = cache.spatial;
        let features = self.channels * spatial;
        let batch = dy.len() / features;
        assert_eq!(batch * features, dy.len());
        assert_eq!(dy.len(), cache.normalized.len());

        let n = F::cast(features as f64);
        let mut dx = Tensor::zeros(dy.shape());

        for b in 0..batch {
            let dys = &dy.data()[b * features..(b + 1) * features];
            let xhat = &cache.normalized.data()[b * features..(b + 1) * features];

            // Parameter gradients and the projection of dy through gamma.
            let mut sum_dxhat = F::zero();
            let mut sum_dxhat_xhat = F::zero();
            for c in 0..self.channels {
                let g = self.gamma.value.data()[c];
                let mut dg = F::zero();
                let mut db = F::zero();
                for s in 0..spatial {
                    let i = c * spatial + s;
                    let d = dys[i];
                    dg = dg + d * xhat[i];
                    db = db + d;
                    let dxh = d * g;
                    sum_dxhat = sum_dxhat + dxh;
                    sum_dxhat_xhat = sum_dxhat_xhat + dxh * xhat[i];
                }
                self.gamma.grad.data_mut()[c] = self.gamma.grad.data()[c] + dg;
                self.beta.grad.data_mut()[c] = self.beta.grad.data()[c] + db;
            }

            let mean_dxhat = sum_dxhat / n;
            let mean_dxhat_xhat = sum_dxhat_xhat / n;
            let inv = cache.inv_std[b];
            let dxs = &mut dx.data_mut()[b * features..(b + 1) * features];
            for c in 0..self.channels {
                let g = self.gamma.value.data()[c];
                for s in 0..spatial {
                    let i = c * spatial + s;
                    let dxh = dys[i] * g;
                    dxs[i] = inv * (dxh - mean_dxhat - xhat[i] * mean_dxhat_xhat);
                }
            }
        }
        dx
    }

    pub fn params_mut(&mut self) -> Vec<(&'static str, &mut Param<F>)> {
        vec![("gamma", &mut self.gamma), ("beta", &mut self.beta)]
    }
}
