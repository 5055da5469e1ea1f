//! Learnable band-pass front end for raw waveforms.
//!
//! Each filter is a windowed ideal band-pass whose only free parameters are
//! the two band edges, so an 80-filter bank costs 160 scalars instead of
//! 80 x 251 free taps. Gradients flow through the closed-form tap formula
//! back to the edges.

use crate::neural::gemm::{axpy, dot8};
use crate::neural::tensor::{Param, Scalar, Tensor};

/// Minimum bandwidth in Hz enforced by the edge constraint map.
pub const MIN_BAND_HZ: f64 = 50.0;

/// Ideal band-pass taps for edges `lo_hz..hi_hz`, centered, without any
/// window. `len` must be odd. With `lo_hz == hi_hz` every tap is exactly
/// zero: the difference of two identical low-pass responses.
pub fn bandpass_taps(lo_hz: f64, hi_hz: f64, len: usize, sample_rate: f64) -> Vec<f64> {
    assert!(len % 2 == 1, "tap count must be odd");
    assert!(sample_rate > 0.0);
    let half = (len / 2) as isize;
    let l = lo_hz / sample_rate;
    let h = hi_hz / sample_rate;
    let two_pi = 2.0 * std::f64::consts::PI;
    (-half..=half)
        .map(|m| {
            if m == 0 {
                2.0 * (h - l)
            } else {
                let mf = m as f64;
                ((two_pi * h * mf).sin() - (two_pi * l * mf).sin()) / (std::f64::consts::PI * mf)
            }
        })
        .collect()
}

/// Hamming window of the given length.
pub fn hamming(len: usize) -> Vec<f64> {
    assert!(len > 1);
    let denom = (len - 1) as f64;
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / denom).cos())
        .collect()
}

/// Converts Hz to mel and back; used to spread the initial band edges the
/// way human hearing spreads resolution.
fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Per-filter result of the edge constraint map, with the branch gates the
/// backward pass needs.
#[derive(Debug, Clone, Copy)]
struct Edges {
    lo: f64,
    hi: f64,
    /// d lo / d f1 (either sign(f1) or 0 when the ceiling clamp is active).
    dlo_df1: f64,
    /// d band / d f1 and d band / d f2 (0 when the width floor is active).
    dband_df1: f64,
    dband_df2: f64,
    /// 1 while lo + band stays below Nyquist, else 0.
    hi_gate: f64,
}

#[derive(Debug, Clone)]
struct SincCache<F> {
    input: Tensor<F>,
    edges: Vec<Edges>,
    taps: Vec<f64>,
}

/// Convolution layer whose kernels are parameterized band-pass filters.
/// Input `[batch, len]` (a raw waveform window per row), output
/// `[batch, filters, len - filter_len + 1]` (valid convolution, stride 1).
#[derive(Debug, Clone)]
pub struct SincConv<F> {
    /// Lower band edges in Hz, one per filter.
    pub f1: Param<F>,
    /// Upper band edges in Hz, one per filter.
    pub f2: Param<F>,
    filters: usize,
    filter_len: usize,
    sample_rate: f64,
    window: Vec<f64>,
    cache: Option<SincCache<F>>,
}

impl<F: Scalar> SincConv<F> {
    /// Band edges start mel-spaced: `filters + 1` points between 30 Hz and
    /// Nyquist, consecutive pairs forming each filter's band.
    pub fn new(filters: usize, filter_len: usize, sample_rate: f64) -> Self {
        assert!(filters > 0);
        assert!(filter_len % 2 == 1, "filter length must be odd");
        assert!(sample_rate > 0.0);
        let nyq = sample_rate / 2.0;
        let mel_lo = hz_to_mel(30.0);
        let mel_hi = hz_to_mel(nyq);
        let points: Vec<f64> = (0..=filters)
            .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / filters as f64))
            .collect();
        let f1 = Tensor::from_vec(
            &[filters],
            points[..filters].iter().map(|&p| F::cast(p)).collect(),
        );
        let f2 = Tensor::from_vec(
            &[filters],
            points[1..].iter().map(|&p| F::cast(p)).collect(),
        );
        SincConv {
            f1: Param::new(f1),
            f2: Param::new(f2),
            filters,
            filter_len,
            sample_rate,
            window: hamming(filter_len),
            cache: None,
        }
    }

    pub fn filters(&self) -> usize {
        self.filters
    }

    pub fn filter_len(&self) -> usize {
        self.filter_len
    }

    pub fn out_len(&self, len: usize) -> usize {
        len + 1 - self.filter_len
    }

    /// Applies the constraint map to one raw edge pair. Keeps
    /// `0 <= lo < hi <= Nyquist` with at least `MIN_BAND_HZ` of width
    /// (except when squeezed against Nyquist by the final clamp).
    fn constrain(&self, f1: f64, f2: f64) -> Edges {
        let nyq = self.sample_rate / 2.0;
        let cap = nyq - MIN_BAND_HZ;
        let abs1 = f1.abs();
        let (lo, dlo_df1) = if abs1 <= cap {
            (abs1, if f1 >= 0.0 { 1.0 } else { -1.0 })
        } else {
            (cap, 0.0)
        };
        let raw_band = f2 - f1;
        let (band, dband_df1, dband_df2) = if raw_band.abs() >= MIN_BAND_HZ {
            let s = if raw_band >= 0.0 { 1.0 } else { -1.0 };
            (raw_band.abs(), -s, s)
        } else {
            (MIN_BAND_HZ, 0.0, 0.0)
        };
        let (hi, hi_gate) = if lo + band <= nyq {
            (lo + band, 1.0)
        } else {
            (nyq, 0.0)
        };
        Edges {
            lo,
            hi,
            dlo_df1,
            dband_df1,
            dband_df2,
            hi_gate,
        }
    }

    /// The effective band `[lo, hi]` in Hz for each filter after constraints.
    pub fn effective_bands(&self) -> Vec<(f64, f64)> {
        (0..self.filters)
            .map(|f| {
                let e = self.constrain(
                    self.f1.value.data()[f].into_f64(),
                    self.f2.value.data()[f].into_f64(),
                );
                (e.lo, e.hi)
            })
            .collect()
    }

    fn build_taps(&self) -> (Vec<Edges>, Vec<f64>) {
        let mut edges = Vec::with_capacity(self.filters);
        let mut taps = Vec::with_capacity(self.filters * self.filter_len);
        for f in 0..self.filters {
            let e = self.constrain(
                self.f1.value.data()[f].into_f64(),
                self.f2.value.data()[f].into_f64(),
            );
            let raw = bandpass_taps(e.lo, e.hi, self.filter_len, self.sample_rate);
            taps.extend(raw.iter().zip(&self.window).map(|(t, w)| t * w));
            edges.push(e);
        }
        (edges, taps)
    }

    pub fn forward(&mut self, x: &Tensor<F>) -> Tensor<F> {
        let shape = x.shape();
        assert_eq!(shape.len(), 2, "expected [batch, samples]");
        let (batch, len) = (shape[0], shape[1]);
        assert!(
            len >= self.filter_len,
            "window of {len} samples shorter than the {}-tap filters",
            self.filter_len
        );
        let out_len = self.out_len(len);
        let (edges, taps) = self.build_taps();

        let mut y = Tensor::zeros(&[batch, self.filters, out_len]);
        for b in 0..batch {
            let xs = &x.data()[b * len..(b + 1) * len];
            let yb = &mut y.data_mut()[b * self.filters * out_len..(b + 1) * self.filters * out_len];
            for f in 0..self.filters {
                let ys = &mut yb[f * out_len..(f + 1) * out_len];
                let ts = &taps[f * self.filter_len..(f + 1) * self.filter_len];
                for (m, &t) in ts.iter().enumerate() {
                    axpy(ys, F::cast(t), &xs[m..m + out_len]);
                }
            }
        }
        self.cache = Some(SincCache {
            input: x.clone(),
            edges,
            taps,
        });
        y
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> Tensor<F> {
        let cache = self.cache.as_ref().expect("backward before forward");
        let (batch, len) = (cache.input.shape()[0], cache.input.shape()[1]);
        let out_len = self.out_len(len);
        assert_eq!(dy.shape(), &[batch, self.filters, out_len]);

        // Tap gradients, accumulated in f64 because each one sums
        // batch * out_len products.
        let mut dtaps = vec![0.0f64; self.filters * self.filter_len];
        let mut dx = Tensor::zeros(cache.input.shape());
        for b in 0..batch {
            let xs = &cache.input.data()[b * len..(b + 1) * len];
            let dyb = &dy.data()[b * self.filters * out_len..(b + 1) * self.filters * out_len];
            let dxs = &mut dx.data_mut()[b * len..(b + 1) * len];
            for f in 0..self.filters {
                let dys = &dyb[f * out_len..(f + 1) * out_len];
                let ts = &cache.taps[f * self.filter_len..(f + 1) * self.filter_len];
                for m in 0..self.filter_len {
                    dtaps[f * self.filter_len + m] += dot8(dys, &xs[m..m + out_len]).into_f64();
                    axpy(&mut dxs[m..m + out_len], F::cast(ts[m]), dys);
                }
            }
        }

        // Chain from taps to the normalized edges, then through the
        // constraint map to the raw parameters.
        let two_pi = 2.0 * std::f64::consts::PI;
        let half = (self.filter_len / 2) as isize;
        for f in 0..self.filters {
            let e = cache.edges[f];
            let l_norm = e.lo / self.sample_rate;
            let h_norm = e.hi / self.sample_rate;
            let mut d_lnorm = 0.0;
            let mut d_hnorm = 0.0;
            for (i, m) in (-half..=half).enumerate() {
                let mf = m as f64;
                let g = dtaps[f * self.filter_len + i] * self.window[i];
                d_hnorm += g * 2.0 * (two_pi * h_norm * mf).cos();
                d_lnorm -= g * 2.0 * (two_pi * l_norm * mf).cos();
            }
            let d_lo = d_lnorm / self.sample_rate;
            let d_hi = d_hnorm / self.sample_rate;

            let df1 = d_lo * e.dlo_df1 + d_hi * e.hi_gate * (e.dlo_df1 + e.dband_df1);
            let df2 = d_hi * e.hi_gate * e.dband_df2;
            self.f1.grad.data_mut()[f] = self.f1.grad.data()[f] + F::cast(df1);
            self.f2.grad.data_mut()[f] = self.f2.grad.data()[f] + F::cast(df2);
        }
        dx
    }

    pub fn params_mut(&mut self) -> Vec<(&'static str, &mut Param<F>)> {
        vec![("f1", &mut self.f1), ("f2", &mut self.f2)]
    }
}
