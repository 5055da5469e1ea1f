//! Shared finite-difference harness for the layer gradient tests.
//!
//! Each `check_*` function builds one randomly configured layer, runs its
//! backward pass, then re-derives every gradient block numerically with
//! central differences and returns the worst relative error seen. The
//! closures rebuild the layer from captured parameter tensors on every
//! evaluation so stale forward caches can never leak between probes.

#![allow(dead_code)]

use supervoice::neural::gradcheck::{central_diff, max_rel_error};
use supervoice::neural::layers::{
    softmax_cross_entropy, AdaptiveAvgPool2d, Conv1d, Conv2d, LayerNorm, LeakyRelu, Linear,
    MaxPool1d, SincConv,
};
use supervoice::neural::tensor::{Scalar, Tensor};
use supervoice::rng::SplitMix64;

/// Probe steps and acceptance bounds for one float width.
///
/// `h` is the relative step for ordinary values (inputs, weights, logits);
/// `h_edges` is the much smaller relative step for the sinc layer's band
/// edges, which live on a hertz scale where `h * |f|` would otherwise span
/// a large fraction of a tap oscillation period. `floor` keeps near-zero
/// gradient entries from being judged on relative terms alone.
pub struct GradTol {
    pub h: f64,
    pub h_edges: f64,
    pub floor: f64,
    pub max_err: f64,
}

/// f32 layers: the forward pass itself rounds at roughly 1e-7 relative, so
/// the step is chosen large enough that rounding noise stays two orders of
/// magnitude under the allowed error.
pub fn tol_f32() -> GradTol {
    GradTol {
        h: 2f64.powi(-6),
        h_edges: 2f64.powi(-12),
        floor: 1e-2,
        max_err: 1e-3,
    }
}

pub fn tol_f64() -> GradTol {
    GradTol {
        h: 2f64.powi(-17),
        h_edges: 2f64.powi(-17),
        floor: 1e-8,
        max_err: 1e-6,
    }
}

/// Sum of elementwise products in f64, used as the scalar readout for
/// layers whose output is a tensor. Its gradient with respect to the
/// layer output is exactly the coefficient tensor.
fn dot_loss<F: Scalar>(y: &Tensor<F>, coeffs: &Tensor<F>) -> f64 {
    assert_eq!(y.shape(), coeffs.shape());
    y.iter()
        .zip(coeffs.iter())
        .map(|(&a, &c)| a.into_f64() * c.into_f64())
        .sum()
}

pub fn check_sinc<F: Scalar>(seed: u64, tol: &GradTol) -> f64 {
    let mut rng = SplitMix64::stream(seed, &[31]);
    let filters = 3 + (rng.next_below(3) as usize);
    let filter_len = [9, 11, 13][rng.next_below(3) as usize];
    let rate = 16_000.0;
    let out_len = 8 + (rng.next_below(8) as usize);
    let len = filter_len + out_len - 1;

    let mut layer: SincConv<F> = SincConv::new(filters, filter_len, rate);
    // Re-seat the band edges well inside the constraint region so the
    // numeric probe never straddles a clamp.
    for f in 0..filters {
        let lo = 300.0 + rng.next_f64() * 4_200.0;
        let width = 200.0 + rng.next_f64() * 1_300.0;
        let hi = (lo + width).min(rate / 2.0 - 200.0);
        layer.f1.value.data_mut()[f] = F::cast(lo);
        layer.f2.value.data_mut()[f] = F::cast(hi);
    }
    let f1_0 = layer.f1.value.clone();
    let f2_0 = layer.f2.value.clone();

    let x: Tensor<F> = Tensor::uniform(&[2, len], 1.0, &mut rng);
    let coeffs: Tensor<F> = Tensor::uniform(&[2, filters, out_len], 1.0, &mut rng);

    let _ = layer.forward(&x);
    let dx = layer.backward(&coeffs);

    let rebuild = |f1: &Tensor<F>, f2: &Tensor<F>| {
        let mut l: SincConv<F> = SincConv::new(filters, filter_len, rate);
        l.f1.value = f1.clone();
        l.f2.value = f2.clone();
        l
    };

    let mut probe = x.clone();
    let num_dx = central_diff(
        &mut |vals| {
            let mut l = rebuild(&f1_0, &f2_0);
            let y = l.forward(&Tensor::from_vec(&[2, len], vals.to_vec()));
            dot_loss(&y, &coeffs)
        },
        probe.data_mut(),
        tol.h,
    );
    let mut worst = max_rel_error(dx.data(), &num_dx, tol.floor);

    let mut f1_probe = f1_0.clone();
    let num_df1 = central_diff(
        &mut |vals| {
            let mut l = rebuild(&Tensor::from_vec(&[filters], vals.to_vec()), &f2_0);
            let y = l.forward(&x);
            dot_loss(&y, &coeffs)
        },
        f1_probe.data_mut(),
        tol.h_edges,
    );
    worst = worst.max(max_rel_error(layer.f1.grad.data(), &num_df1, tol.floor));

    let mut f2_probe = f2_0.clone();
    let num_df2 = central_diff(
        &mut |vals| {
            let mut l = rebuild(&f1_0, &Tensor::from_vec(&[filters], vals.to_vec()));
            let y = l.forward(&x);
            dot_loss(&y, &coeffs)
        },
        f2_probe.data_mut(),
        tol.h_edges,
    );
    worst.max(max_rel_error(layer.f2.grad.data(), &num_df2, tol.floor))
}

pub fn check_conv1d<F: Scalar>(seed: u64, tol: &GradTol) -> f64 {
    let mut rng = SplitMix64::stream(seed, &[32]);
    let in_ch = 1 + (rng.next_below(3) as usize);
    let out_ch = 2 + (rng.next_below(2) as usize);
    let k = [3, 5][rng.next_below(2) as usize];
    let len = k + 5 + (rng.next_below(4) as usize);

    let mut layer: Conv1d<F> = Conv1d::new(in_ch, out_ch, k, &mut rng);
    let w0 = layer.weight.value.clone();
    let b0 = layer.bias.value.clone();
    let x: Tensor<F> = Tensor::uniform(&[2, in_ch, len], 1.0, &mut rng);
    let out_len = layer.out_len(len);
    let coeffs: Tensor<F> = Tensor::uniform(&[2, out_ch, out_len], 1.0, &mut rng);

    let _ = layer.forward(&x);
    let dx = layer.backward(&coeffs);

    let rebuild = |w: &Tensor<F>, b: &Tensor<F>, rng: &mut SplitMix64| {
        let mut l: Conv1d<F> = Conv1d::new(in_ch, out_ch, k, rng);
        l.weight.value = w.clone();
        l.bias.value = b.clone();
        l
    };

    let mut scratch = SplitMix64::stream(seed, &[33]);
    let mut probe = x.clone();
    let num_dx = central_diff(
        &mut |vals| {
            let mut l = rebuild(&w0, &b0, &mut scratch);
            let y = l.forward(&Tensor::from_vec(&[2, in_ch, len], vals.to_vec()));
            dot_loss(&y, &coeffs)
        },
        probe.data_mut(),
        tol.h,
    );
    let mut worst = max_rel_error(dx.data(), &num_dx, tol.floor);

    let mut wprobe = w0.clone();
    let wshape = w0.shape().to_vec();
    let num_dw = central_diff(
        &mut |vals| {
            let mut l = rebuild(&Tensor::from_vec(&wshape, vals.to_vec()), &b0, &mut scratch);
            let y = l.forward(&x);
            dot_loss(&y, &coeffs)
        },
        wprobe.data_mut(),
        tol.h,
    );
    worst = worst.max(max_rel_error(layer.weight.grad.data(), &num_dw, tol.floor));

    let mut bprobe = b0.clone();
    let num_db = central_diff(
        &mut |vals| {
            let mut l = rebuild(&w0, &Tensor::from_vec(&[out_ch], vals.to_vec()), &mut scratch);
            let y = l.forward(&x);
            dot_loss(&y, &coeffs)
        },
        bprobe.data_mut(),
        tol.h,
    );
    worst.max(max_rel_error(layer.bias.grad.data(), &num_db, tol.floor))
}

pub fn check_conv2d<F: Scalar>(seed: u64, tol: &GradTol) -> f64 {
    let mut rng = SplitMix64::stream(seed, &[34]);
    let in_ch = 1 + (rng.next_below(2) as usize);
    let out_ch = 2;
    let kernel = [(3, 3), (2, 3), (3, 2)][rng.next_below(3) as usize];
    let dil = [(1, 1), (2, 1), (1, 2), (2, 2)][rng.next_below(4) as usize];
    let stride = [(1, 1), (2, 2), (1, 2), (2, 1)][rng.next_below(4) as usize];
    let h = 6 + (rng.next_below(3) as usize);
    let w = 6 + (rng.next_below(3) as usize);

    let mut layer: Conv2d<F> = Conv2d::new(in_ch, out_ch, kernel, dil, stride, &mut rng);
    let w0 = layer.weight.value.clone();
    let b0 = layer.bias.value.clone();
    let x: Tensor<F> = Tensor::uniform(&[2, in_ch, h, w], 1.0, &mut rng);
    let (oh, ow) = layer.out_dims(h, w);
    let coeffs: Tensor<F> = Tensor::uniform(&[2, out_ch, oh, ow], 1.0, &mut rng);

    let _ = layer.forward(&x);
    let dx = layer.backward(&coeffs);

    let rebuild = |wt: &Tensor<F>, b: &Tensor<F>, rng: &mut SplitMix64| {
        let mut l: Conv2d<F> = Conv2d::new(in_ch, out_ch, kernel, dil, stride, rng);
        l.weight.value = wt.clone();
        l.bias.value = b.clone();
        l
    };

    let mut scratch = SplitMix64::stream(seed, &[35]);
    let mut probe = x.clone();
    let num_dx = central_diff(
        &mut |vals| {
            let mut l = rebuild(&w0, &b0, &mut scratch);
            let y = l.forward(&Tensor::from_vec(&[2, in_ch, h, w], vals.to_vec()));
            dot_loss(&y, &coeffs)
        },
        probe.data_mut(),
        tol.h,
    );
    let mut worst = max_rel_error(dx.data(), &num_dx, tol.floor);

    let mut wprobe = w0.clone();
    let wshape = w0.shape().to_vec();
    let num_dw = central_diff(
        &mut |vals| {
            let mut l = rebuild(&Tensor::from_vec(&wshape, vals.to_vec()), &b0, &mut scratch);
            let y = l.forward(&x);
            dot_loss(&y, &coeffs)
        },
        wprobe.data_mut(),
        tol.h,
    );
    worst = worst.max(max_rel_error(layer.weight.grad.data(), &num_dw, tol.floor));

    let mut bprobe = b0.clone();
    let num_db = central_diff(
        &mut |vals| {
            let mut l = rebuild(&w0, &Tensor::from_vec(&[out_ch], vals.to_vec()), &mut scratch);
            let y = l.forward(&x);
            dot_loss(&y, &coeffs)
        },
        bprobe.data_mut(),
        tol.h,
    );
    worst.max(max_rel_error(layer.bias.grad.data(), &num_db, tol.floor))
}

pub fn check_layer_norm<F: Scalar>(seed: u64, tol: &GradTol) -> f64 {
    let mut rng = SplitMix64::stream(seed, &[36]);
    let ch = 2 + (rng.next_below(3) as usize);
    let spatial = 3 + (rng.next_below(3) as usize);
    let shape = vec![2, ch, spatial];

    let mut layer: LayerNorm<F> = LayerNorm::new(ch);
    // A non-unit scale so the gamma path is actually exercised.
    for (i, g) in layer.gamma.value.data_mut().iter_mut().enumerate() {
        *g = F::cast(0.8 + 0.15 * i as f64);
    }
    for (i, b) in layer.beta.value.data_mut().iter_mut().enumerate() {
        *b = F::cast(0.1 * i as f64 - 0.2);
    }
    let g0 = layer.gamma.value.clone();
    let b0 = layer.beta.value.clone();
    let x: Tensor<F> = Tensor::uniform(&shape, 1.0, &mut rng);
    let coeffs: Tensor<F> = Tensor::uniform(&shape, 1.0, &mut rng);

    let _ = layer.forward(&x);
    let dx = layer.backward(&coeffs);

    let rebuild = |g: &Tensor<F>, b: &Tensor<F>| {
        let mut l: LayerNorm<F> = LayerNorm::new(ch);
        l.gamma.value = g.clone();
        l.beta.value = b.clone();
        l
    };

    let mut probe = x.clone();
    let num_dx = central_diff(
        &mut |vals| {
            let mut l = rebuild(&g0, &b0);
            let y = l.forward(&Tensor::from_vec(&shape, vals.to_vec()));
            dot_loss(&y, &coeffs)
        },
        probe.data_mut(),
        tol.h,
    );
    let mut worst = max_rel_error(dx.data(), &num_dx, tol.floor);

    let mut gprobe = g0.clone();
    let num_dg = central_diff(
        &mut |vals| {
            let mut l = rebuild(&Tensor::from_vec(&[ch], vals.to_vec()), &b0);
            let y = l.forward(&x);
            dot_loss(&y, &coeffs)
        },
        gprobe.data_mut(),
        tol.h,
    );
    worst = worst.max(max_rel_error(layer.gamma.grad.data(), &num_dg, tol.floor));

    let mut bprobe = b0.clone();
    let num_db = central_diff(
        &mut |vals| {
            let mut l = rebuild(&g0, &Tensor::from_vec(&[ch], vals.to_vec()));
            let y = l.forward(&x);
            dot_loss(&y, &coeffs)
        },
        bprobe.data_mut(),
        tol.h,
    );
    worst.max(max_rel_error(layer.beta.grad.data(), &num_db, tol.floor))
}

pub fn check_leaky_relu<F: Scalar>(seed: u64, tol: &GradTol) -> f64 {
    let mut rng = SplitMix64::stream(seed, &[37]);
    let shape = vec![2, 3, 4 + (rng.next_below(4) as usize)];
    let mut x: Tensor<F> = Tensor::uniform(&shape, 1.0, &mut rng);
    // Push every sample away from the kink at zero so the probe stays on
    // one side of it.
    for v in x.data_mut() {
        let f = v.into_f64();
        if f.abs() < 0.1 {
            *v = F::cast(f + 0.15 * if f < 0.0 { -1.0 } else { 1.0 });
        }
    }
    let coeffs: Tensor<F> = Tensor::uniform(&shape, 1.0, &mut rng);

    let mut layer: LeakyRelu<F> = LeakyRelu::new(0.2);
    let _ = layer.forward(&x);
    let dx = layer.backward(&coeffs);

    let mut probe = x.clone();
    let num_dx = central_diff(
        &mut |vals| {
            let mut l: LeakyRelu<F> = LeakyRelu::new(0.2);
            let y = l.forward(&Tensor::from_vec(&shape, vals.to_vec()));
            dot_loss(&y, &coeffs)
        },
        probe.data_mut(),
        tol.h,
    );
    max_rel_error(dx.data(), &num_dx, tol.floor)
}

pub fn check_max_pool<F: Scalar>(seed: u64, tol: &GradTol) -> f64 {
    let mut rng = SplitMix64::stream(seed, &[38]);
    let k = [2, 3][rng.next_below(2) as usize];
    let len = k * (2 + rng.next_below(3) as usize) + rng.next_below(2) as usize;
    let shape = vec![2, 2, len];
    let n = 2 * 2 * len;

    // Values on a shuffled evenly spaced grid whose step is six probe
    // steps wide, so a single perturbed element can never swap which
    // element wins a pooling window.
    // A swap needs the probe excursion h * max(1, |x|) to reach the grid
    // step, i.e. |x| >= 6; keep the extreme grid values under half that.
    let step = 6.0 * tol.h;
    assert!(step * n as f64 / 2.0 < 3.0, "grid would outgrow the probe-step margin");
    let mut vals: Vec<F> = (0..n)
        .map(|i| F::cast(step * (i as f64 - n as f64 / 2.0)))
        .collect();
    for i in (1..n).rev() {
        vals.swap(i, rng.next_below(i as u64 + 1) as usize);
    }
    let x = Tensor::from_vec(&shape, vals);
    let out_len = len / k;
    let coeffs: Tensor<F> = Tensor::uniform(&[2, 2, out_len], 1.0, &mut rng);

    let mut layer: MaxPool1d<F> = MaxPool1d::new(k);
    let _ = layer.forward(&x);
    let dx = layer.backward(&coeffs);

    let mut probe = x.clone();
    let num_dx = central_diff(
        &mut |vals| {
            let mut l: MaxPool1d<F> = MaxPool1d::new(k);
            let y = l.forward(&Tensor::from_vec(&shape, vals.to_vec()));
            dot_loss(&y, &coeffs)
        },
        probe.data_mut(),
        tol.h,
    );
    max_rel_error(dx.data(), &num_dx, tol.floor)
}

pub fn check_avg_pool<F: Scalar>(seed: u64, tol: &GradTol) -> f64 {
    let mut rng = SplitMix64::stream(seed, &[39]);
    let (oh, ow) = (2, 3);
    let h = oh + 2 + (rng.next_below(3) as usize);
    let w = ow + 2 + (rng.next_below(3) as usize);
    let shape = vec![2, 2, h, w];
    let x: Tensor<F> = Tensor::uniform(&shape, 1.0, &mut rng);
    let coeffs: Tensor<F> = Tensor::uniform(&[2, 2, oh, ow], 1.0, &mut rng);

    let mut layer: AdaptiveAvgPool2d<F> = AdaptiveAvgPool2d::new(oh, ow);
    let _ = layer.forward(&x);
    let dx = layer.backward(&coeffs);

    let mut probe = x.clone();
    let num_dx = central_diff(
        &mut |vals| {
            let mut l: AdaptiveAvgPool2d<F> = AdaptiveAvgPool2d::new(oh, ow);
            let y = l.forward(&Tensor::from_vec(&shape, vals.to_vec()));
            dot_loss(&y, &coeffs)
        },
        probe.data_mut(),
        tol.h,
    );
    max_rel_error(dx.data(), &num_dx, tol.floor)
}

pub fn check_linear<F: Scalar>(seed: u64, tol: &GradTol) -> f64 {
    let mut rng = SplitMix64::stream(seed, &[40]);
    let in_dim = 3 + (rng.next_below(4) as usize);
    let out_dim = 2 + (rng.next_below(3) as usize);

    let mut layer: Linear<F> = Linear::new(in_dim, out_dim, &mut rng);
    let w0 = layer.weight.value.clone();
    let b0 = layer.bias.value.clone();
    let x: Tensor<F> = Tensor::uniform(&[3, in_dim], 1.0, &mut rng);
    let coeffs: Tensor<F> = Tensor::uniform(&[3, out_dim], 1.0, &mut rng);

    let _ = layer.forward(&x);
    let dx = layer.backward(&coeffs);

    let rebuild = |w: &Tensor<F>, b: &Tensor<F>, rng: &mut SplitMix64| {
        let mut l: Linear<F> = Linear::new(in_dim, out_dim, rng);
        l.weight.value = w.clone();
        l.bias.value = b.clone();
        l
    };

    let mut scratch = SplitMix64::stream(seed, &[41]);
    let mut probe = x.clone();
    let num_dx = central_diff(
        &mut |vals| {
            let mut l = rebuild(&w0, &b0, &mut scratch);
            let y = l.forward(&Tensor::from_vec(&[3, in_dim], vals.to_vec()));
            dot_loss(&y, &coeffs)
        },
        probe.data_mut(),
        tol.h,
    );
    let mut worst = max_rel_error(dx.data(), &num_dx, tol.floor);

    let mut wprobe = w0.clone();
    let wshape = w0.shape().to_vec();
    let num_dw = central_diff(
        &mut |vals| {
            let mut l = rebuild(&Tensor::from_vec(&wshape, vals.to_vec()), &b0, &mut scratch);
            let y = l.forward(&x);
            dot_loss(&y, &coeffs)
        },
        wprobe.data_mut(),
        tol.h,
    );
    worst = worst.max(max_rel_error(layer.weight.grad.data(), &num_dw, tol.floor));

    let mut bprobe = b0.clone();
    let num_db = central_diff(
        &mut |vals| {
            let mut l = rebuild(&w0, &Tensor::from_vec(&[out_dim], vals.to_vec()), &mut scratch);
            let y = l.forward(&x);
            dot_loss(&y, &coeffs)
        },
        bprobe.data_mut(),
        tol.h,
    );
    worst.max(max_rel_error(layer.bias.grad.data(), &num_db, tol.floor))
}

pub fn check_softmax_cross_entropy<F: Scalar>(seed: u64, tol: &GradTol) -> f64 {
    let mut rng = SplitMix64::stream(seed, &[42]);
    let classes = 3 + (rng.next_below(3) as usize);
    let batch = 4;
    let logits: Tensor<F> = Tensor::uniform(&[batch, classes], 2.0, &mut rng);
    let labels: Vec<usize> = (0..batch)
        .map(|_| rng.next_below(classes as u64) as usize)
        .collect();

    let (_, analytic) = softmax_cross_entropy(&logits, &labels);

    let mut probe = logits.clone();
    let numeric = central_diff(
        &mut |vals: &[F]| {
            let (loss, _) =
                softmax_cross_entropy(&Tensor::from_vec(&[batch, classes], vals.to_vec()), &labels);
            loss.into_f64()
        },
        probe.data_mut(),
        tol.h,
    );
    max_rel_error(analytic.data(), &numeric, tol.floor)
}

/// Every layer check paired with its name, for sweep-style callers.
pub fn all_layer_checks<F: Scalar>(seed: u64, tol: &GradTol) -> Vec<(&'static str, f64)> {
    vec![
        ("sinc conv", check_sinc::<F>(seed, tol)),
        ("conv1d", check_conv1d::<F>(seed, tol)),
        ("dilated conv2d", check_conv2d::<F>(seed, tol)),
        ("layer norm", check_layer_norm::<F>(seed, tol)),
        ("leaky relu", check_leaky_relu::<F>(seed, tol)),
        ("max pool", check_max_pool::<F>(seed, tol)),
        ("adaptive avg pool", check_avg_pool::<F>(seed, tol)),
        ("linear", check_linear::<F>(seed, tol)),
        ("softmax cross-entropy", check_softmax_cross_entropy::<F>(seed, tol)),
    ]
}
