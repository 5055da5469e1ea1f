//! Pooling layers: non-overlapping 1-d max pooling and adaptive 2-d
//! average pooling down to a fixed output grid.

use crate::neural::tensor::{Scalar, Tensor};

/// Max pooling over `[batch, channels, length]` with kernel = stride = `k`.
/// A trailing remainder shorter than `k` is dropped.
#[derive(Debug, Clone)]
pub struct MaxPool1d<F> {
    k: usize,
    argmax: Vec<u32>,
    in_shape: Vec<usize>,
    _marker: std::marker::PhantomData<F>,
}

impl<F: Scalar> MaxPool1d<F> {
    pub fn new(k: usize) -> Self {
        assert!(k > 0);
        MaxPool1d {
            k,
            argmax: Vec::new(),
            in_shape: Vec::new(),
            _marker: std::marker::PhantomData,
        }
    }

    pub fn out_len(&self, len: usize) -> usize {
        len / self.k
    }

    pub fn forward(&mut self, x: &Tensor<F>) -> Tensor<F> {
        let shape = x.shape();
        assert_eq!(shape.len(), 3, "expected [batch, channels, length]");
        let (batch, ch, len) = (shape[0], shape[1], shape[2]);
        let out_len = len / self.k;
        assert!(out_len > 0, "input length {len} shorter than kernel {}", self.k);

        let mut y = Tensor::zeros(&[batch, ch, out_len]);
        self.argmax.clear();
        self.argmax.reserve(batch * ch * out_len);
        self.in_shape = shape.to_vec();

        for bc in 0..batch * ch {
            let xs = &x.data()[bc * len..bc * len + len];
            let ys = &mut y.data_mut()[bc * out_len..(bc + 1) * out_len];
            for o in 0..out_len {
                let start = o * self.k;
                let mut best = xs[start];
                let mut best_i = start;
                for i in start + 1..start + self.k {
                    if xs[i] > best {
                        best = xs[i];
                        best_i = i;
                    }
                }
                ys[o] = best;
                self.argmax.push((bc * len + best_i) as u32);
            }
        }
        y
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> Tensor<F> {
        assert_eq!(dy.len(), self.argmax.len(), "backward before forward");
        let mut dx = Tensor::zeros(&self.in_shape);
        let data = dx.data_mut();
        for (&idx, &d) in self.argmax.iter().zip(dy.data()) {
            data[idx as usize] = data[idx as usize] + d;
        }
        dx
    }
}

/// Average pooling from any `[batch, channels, h, w]` grid down to a fixed
/// `out_h x out_w` grid. Region boundaries follow floor/ceil splits, so
/// regions overlap when the input size is not a multiple of the output size.
#[derive(Debug, Clone)]
pub struct AdaptiveAvgPool2d<F> {
    out_h: usize,
    out_w: usize,
    in_shape: Vec<usize>,
    _marker: std::marker::PhantomData<F>,
}

fn region(i: usize, in_size: usize, out_size: usize) -> (usize, usize) {
    let start = i * in_size / out_size;
    let end = ((i + 1) * in_size).div_ceil(out_size);
    (start, end)
}

impl<F: Scalar> AdaptiveAvgPool2d<F> {
    pub fn new(out_h: usize, out_w: usize) -> Self {
        assert!(out_h > 0 && out_w > 0);
        AdaptiveAvgPool2d {
            out_h,
            out_w,
            in_shape: Vec::new(),
            _marker: std::marker::PhantomData,
        }
    }

    pub fn forward(&mut self, x: &Tensor<F>) -> Tensor<F> {
        let shape = x.shape();
        assert_eq!(shape.len(), 4, "expected [batch, channels, h, w]");
        let (batch, ch, h, w) = (shape[0], shape[1], shape[2], shape[3]);
        assert!(h >= self.out_h && w >= self.out_w, "input grid smaller than output");
        self.in_shape = shape.to_vec();

        let mut y = Tensor::zeros(&[batch, ch, self.out_h, self.out_w]);
        for bc in 0..batch * ch {
            let xs = &x.data()[bc * h * w..(bc + 1) * h * w];
            let ys = &mut y.data_mut()[bc * self.out_h * self.out_w..(bc + 1) * self.out_h * self.out_w];
            for oy in 0..self.out_h {
                let (y0, y1) = region(oy, h, self.out_h);
                for ox in 0..self.out_w {
                    let (x0, x1) = region(ox, w, self.out_w);
                    let mut acc = F::zero();
                    for iy in y0..y1 {
                        for ix in x0..x1 {
                            acc = acc + xs[iy * w + ix];
                        }
                    }
                    let count = F::cast(((y1 - y0) * (x1 - x0)) as f64);
                    ys[oy * self.out_w + ox] = acc / count;
                }
            }
        }
        y
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> Tensor<F> {
        assert!(!self.in_shape.is_empty(), "backward before forward");
        let (h, w) = (self.in_shape[2], self.in_shape[3]);
        let mut dx = Tensor::zeros(&self.in_shape);
        let bc_total = self.in_shape[0] * self.in_shape[1];
        assert_eq!(dy.len(), bc_total * self.out_h * self.out_w);

        for bc in 0..bc_total {
            let dys = &dy.data()[bc * self.out_h * self.out_w..(bc + 1) * self.out_h * self.out_w];
            let dxs = &mut dx.data_mut()[bc * h * w..(bc + 1) * h * w];
            for oy in 0..self.out_h {
                let (y0, y1) = region(oy, h, self.out_h);
                for ox in 0..self.out_w {
                    let (x0, x1) = region(ox, w, self.out_w);
                    let count = F::cast(((y1 - y0) * (x1 - x0)) as f64);
                    let share = dys[oy * self.out_w + ox] / count;
                    for iy in y0..y1 {
                        for ix in x0..x1 {
                            dxs[iy * w + ix] = dxs[iy * w + ix] + share;
                        }
                    }
                }
            }
        }
        dx
    }
}
