//! 2-d convolution with dilation, stride, and "same" padding.
//!
//! Output size is `ceil(input / stride)` per axis; zero padding is split as
//! evenly as possible with the extra column on the trailing side. The inner
//! product is an im2col gather followed by row-walking multiply-accumulate,
//! rebuilt per sample so only the layer input is cached between passes.

use crate::neural::gemm::{axpy, dot8};
use crate::neural::tensor::{Param, Scalar, Tensor};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Geometry {
    h: usize,
    w: usize,
    out_h: usize,
    out_w: usize,
    pad_top: usize,
    pad_left: usize,
    padded_h: usize,
    padded_w: usize,
}

#[derive(Debug, Clone)]
pub struct Conv2d<F> {
    pub weight: Param<F>,
    pub bias: Param<F>,
    in_ch: usize,
    out_ch: usize,
    kh: usize,
    kw: usize,
    dil: (usize, usize),
    stride: (usize, usize),
    cache: Option<(Tensor<F>, Geometry)>,
}

fn axis_geometry(len: usize, k: usize, dil: usize, stride: usize) -> (usize, usize, usize) {
    let eff = (k - 1) * dil + 1;
    let out = len.div_ceil(stride);
    let total = ((out - 1) * stride + eff).saturating_sub(len);
    (out, total / 2, total)
}

impl<F: Scalar> Conv2d<F> {
    /// Kernel `(kh, kw)` with per-axis dilation and stride. Weights uniform
    /// in +-sqrt(1/fan_in), fan_in = in_ch * kh * kw.
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: (usize, usize),
        dil: (usize, usize),
        stride: (usize, usize),
        rng: &mut SplitMix64,
    ) -> Self {
        let (kh, kw) = kernel;
        assert!(in_ch > 0 && out_ch > 0 && kh > 0 && kw > 0);
        assert!(dil.0 > 0 && dil.1 > 0 && stride.0 > 0 && stride.1 > 0);
        let bound = (1.0 / (in_ch * kh * kw) as f64).sqrt();
        Conv2d {
            weight: Param::new(Tensor::uniform(&[out_ch, in_ch, kh, kw], bound, rng)),
            bias: Param::new(Tensor::zeros(&[out_ch])),
            in_ch,
            out_ch,
            kh,
            kw,
            dil,
            stride,
            cache: None,
        }
    }

    pub fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        (h.div_ceil(self.stride.0), w.div_ceil(self.stride.1))
    }

    fn geometry(&self, h: usize, w: usize) -> Geometry {
        let (out_h, pad_top, total_h) = axis_geometry(h, self.kh, self.dil.0, self.stride.0);
        let (out_w, pad_left, total_w) = axis_geometry(w, self.kw, self.dil.1, self.stride.1);
        Geometry {
            h,
            w,
            out_h,
            out_w,
            pad_top,
            pad_left,
            padded_h: h + total_h,
            padded_w: w + total_w,
        }
    }

    fn pad_sample(&self, xs: &[F], g: Geometry) -> Vec<F> {
        let mut xp = vec![F::zero(); self.in_ch * g.padded_h * g.padded_w];
        for ic in 0..self.in_ch {
            for iy in 0..g.h {
                let src = &xs[(ic * g.h + iy) * g.w..(ic * g.h + iy + 1) * g.w];
                let dst_base = (ic * g.padded_h + iy + g.pad_top) * g.padded_w + g.pad_left;
                xp[dst_base..dst_base + g.w].copy_from_slice(src);
            }
        }
        xp
    }

    fn im2col(&self, xp: &[F], g: Geometry) -> Vec<F> {
        let k = self.in_ch * self.kh * self.kw;
        let ohw = g.out_h * g.out_w;
        let mut col = vec![F::zero(); k * ohw];
        for ic in 0..self.in_ch {
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let p = (ic * self.kh + ky) * self.kw + kx;
                    let row = &mut col[p * ohw..(p + 1) * ohw];
                    for oy in 0..g.out_h {
                        let iy = oy * self.stride.0 + ky * self.dil.0;
                        let src_base = (ic * g.padded_h + iy) * g.padded_w + kx * self.dil.1;
                        for ox in 0..g.out_w {
                            row[oy * g.out_w + ox] = xp[src_base + ox * self.stride.1];
                        }
                    }
                }
            }
        }
        col
    }

    pub fn forward(&mut self, x: &Tensor<F>) -> Tensor<F> {
        let shape = x.shape();
        assert_eq!(shape.len(), 4, "expected [batch, channels, h, w]");
        assert_eq!(shape[1], self.in_ch, "input channel mismatch");
        let (batch, h, w) = (shape[0], shape[2], shape[3]);
        let g = self.geometry(h, w);
        let ohw = g.out_h * g.out_w;
        let k = self.in_ch * self.kh * self.kw;

        let mut y = Tensor::zeros(&[batch, self.out_ch, g.out_h, g.out_w]);
        for b in 0..batch {
            let xs = &x.data()[b * self.in_ch * h * w..(b + 1) * self.in_ch * h * w];
            let xp = self.pad_sample(xs, g);
            let col = self.im2col(&xp, g);
            let yb = &mut y.data_mut()[b * self.out_ch * ohw..(b + 1) * self.out_ch * ohw];
            for oc in 0..self.out_ch {
                let bias = self.bias.value.data()[oc];
                for v in &mut yb[oc * ohw..(oc + 1) * ohw] {
                    *v = bias;
                }
                let wrow = &self.weight.value.data()[oc * k..(oc + 1) * k];
                for (p, &wv) in wrow.iter().enumerate() {
                    if wv != F::zero() {
                        axpy(&mut yb[oc * ohw..(oc + 1) * ohw], wv, &col[p * ohw..(p + 1) * ohw]);
                    }
                }
            }
        }
        self.cache = Some((x.clone(), g));
        y
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> Tensor<F> {
        let (x, g) = self.cache.as_ref().expect("backward before forward");
        let g = *g;
        let batch = x.shape()[0];
        let ohw = g.out_h * g.out_w;
        let k = self.in_ch * self.kh * self.kw;
        assert_eq!(dy.shape(), &[batch, self.out_ch, g.out_h, g.out_w]);

        let mut dx = Tensor::zeros(x.shape());
        for b in 0..batch {
            let xs = &x.data()[b * self.in_ch * g.h * g.w..(b + 1) * self.in_ch * g.h * g.w];
            let xp = self.pad_sample(xs, g);
            let col = self.im2col(&xp, g);
            let dyb = &dy.data()[b * self.out_ch * ohw..(b + 1) * self.out_ch * ohw];

            let mut dcol = vec![F::zero(); k * ohw];
            for oc in 0..self.out_ch {
                let dys = &dyb[oc * ohw..(oc + 1) * ohw];
                let mut db = F::zero();
                for &d in dys {
                    db = db + d;
                }
                self.bias.grad.data_mut()[oc] = self.bias.grad.data()[oc] + db;
                let wrow = &self.weight.value.data()[oc * k..(oc + 1) * k];
                let gw = &mut self.weight.grad.data_mut()[oc * k..(oc + 1) * k];
                for p in 0..k {
                    gw[p] = gw[p] + dot8(dys, &col[p * ohw..(p + 1) * ohw]);
                    if wrow[p] != F::zero() {
                        axpy(&mut dcol[p * ohw..(p + 1) * ohw], wrow[p], dys);
                    }
                }
            }

            // col2im: scatter the column gradients back through padding.
            let mut dxp = vec![F::zero(); self.in_ch * g.padded_h * g.padded_w];
            for ic in 0..self.in_ch {
                for ky in 0..self.kh {
                    for kx in 0..self.kw {
                        let p = (ic * self.kh + ky) * self.kw + kx;
                        let row = &dcol[p * ohw..(p + 1) * ohw];
                        for oy in 0..g.out_h {
                            let iy = oy * self.stride.0 + ky * self.dil.0;
                            let dst_base = (ic * g.padded_h + iy) * g.padded_w + kx * self.dil.1;
                            for ox in 0..g.out_w {
                                let d = dst_base + ox * self.stride.1;
                                dxp[d] = dxp[d] + row[oy * g.out_w + ox];
                            }
                        }
                    }
                }
            }
            let dxs = &mut dx.data_mut()[b * self.in_ch * g.h * g.w..(b + 1) * self.in_ch * g.h * g.w];
            for ic in 0..self.in_ch {
                for iy in 0..g.h {
                    let src_base = (ic * g.padded_h + iy + g.pad_top) * g.padded_w + g.pad_left;
                    let dst = &mut dxs[(ic * g.h + iy) * g.w..(ic * g.h + iy + 1) * g.w];
                    dst.copy_from_slice(&dxp[src_base..src_base + g.w]);
                }
            }
        }
        dx
    }

    pub fn params_mut(&mut self) -> Vec<(&'static str, &mut Param<F>)> {
        vec![("weight", &mut self.weight), ("bias", &mut self.bias)]
    }
}
