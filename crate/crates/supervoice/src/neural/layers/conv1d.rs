//! 1-d convolution, valid padding, unit stride.

use crate::neural::gemm::{axpy, dot8};
use crate::neural::tensor::{Param, Scalar, Tensor};
use crate::rng::SplitMix64;

#[derive(Debug, Clone)]
pub struct Conv1d<F> {
    pub weight: Param<F>,
    pub bias: Param<F>,
    in_ch: usize,
    out_ch: usize,
    k: usize,
    cache: Option<Tensor<F>>,
}

impl<F: Scalar> Conv1d<F> {
    /// Weights uniform in +-sqrt(1/fan_in) with fan_in = in_ch * k.
    pub fn new(in_ch: usize, out_ch: usize, k: usize, rng: &mut SplitMix64) -> Self {
        assert!(in_ch > 0 && out_ch > 0 && k > 0);
        let bound = (1.0 / (in_ch * k) as f64).sqrt();
        Conv1d {
            weight: Param::new(Tensor::uniform(&[out_ch, in_ch, k], bound, rng)),
            bias: Param::new(Tensor::zeros(&[out_ch])),
            in_ch,
            out_ch,
            k,
            cache: None,
        }
    }

    pub fn out_len(&self, len: usize) -> usize {
        len + 1 - self.k
    }

    pub fn forward(&mut self, x: &Tensor<F>) -> Tensor<F> {
        let shape = x.shape();
        assert_eq!(shape.len(), 3, "expected [batch, channels, length]");
        assert_eq!(shape[1], self.in_ch, "input channel mismatch");
        let (batch, len) = (shape[0], shape[2]);
        assert!(len >= self.k, "input length {len} shorter than kernel {}", self.k);
        let out_len = self.out_len(len);

        let mut y = Tensor::zeros(&[batch, self.out_ch, out_len]);
        for b in 0..batch {
            let xb = &x.data()[b * self.in_ch * len..(b + 1) * self.in_ch * len];
            let yb = &mut y.data_mut()[b * self.out_ch * out_len..(b + 1) * self.out_ch * out_len];
            for oc in 0..self.out_ch {
                let ys = &mut yb[oc * out_len..(oc + 1) * out_len];
                let bias = self.bias.value.data()[oc];
                for v in ys.iter_mut() {
                    *v = bias;
                }
                for ic in 0..self.in_ch {
                    let xs = &xb[ic * len..(ic + 1) * len];
                    let ws = &self.weight.value.data()[(oc * self.in_ch + ic) * self.k..];
                    for m in 0..self.k {
                        axpy(ys, ws[m], &xs[m..m + out_len]);
                    }
                }
            }
        }
        self.cache = Some(x.clone());
        y
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> Tensor<F> {
        let x = self.cache.as_ref().expect("backward before forward");
        let (batch, len) = (x.shape()[0], x.shape()[2]);
        let out_len = self.out_len(len);
        assert_eq!(dy.shape(), &[batch, self.out_ch, out_len]);

        let mut dx = Tensor::zeros(x.shape());
        for b in 0..batch {
            let xb = &x.data()[b * self.in_ch * len..(b + 1) * self.in_ch * len];
            let dyb = &dy.data()[b * self.out_ch * out_len..(b + 1) * self.out_ch * out_len];
            for oc in 0..self.out_ch {
                let dys = &dyb[oc * out_len..(oc + 1) * out_len];
                let mut db = F::zero();
                for &d in dys {
                    db = db + d;
                }
                self.bias.grad.data_mut()[oc] = self.bias.grad.data()[oc] + db;
                for ic in 0..self.in_ch {
                    let xs = &xb[ic * len..(ic + 1) * len];
                    let wbase = (oc * self.in_ch + ic) * self.k;
                    for m in 0..self.k {
                        let dw = dot8(dys, &xs[m..m + out_len]);
                        self.weight.grad.data_mut()[wbase + m] =
                            self.weight.grad.data()[wbase + m] + dw;
                    }
                }
            }
            let dxb = &mut dx.data_mut()[b * self.in_ch * len..(b + 1) * self.in_ch * len];
            for oc in 0..self.out_ch {
                let dys = &dyb[oc * out_len..(oc + 1) * out_len];
                for ic in 0..self.in_ch {
                    let dxs = &mut dxb[ic * len..(ic + 1) * len];
                    let ws = &self.weight.value.data()[(oc * self.in_ch + ic) * self.k..];
                    for m in 0..self.k {
                        axpy(&mut dxs[m..m + out_len], ws[m], dys);
                    }
                }
            }
        }
        dx
    }

    pub fn params_mut(&mut self) -> Vec<(&'static str, &mut Param<F>)> {
        vec![("weight", &mut self.weight), ("bias", &mut self.bias)]
    }
}
