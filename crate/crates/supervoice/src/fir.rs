//! Kaiser-windowed sinc FIR design and zero-phase "same" convolution.
//!
//! Shared by the decimator in `preprocess` and the replay device models in
//! `synth`. Filters are linear-phase with an odd tap count; convolution is
//! centered so the output has the input's length and no group delay.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};

/// Kaiser shape parameter for a target stopband attenuation in dB,
/// using the standard empirical fit.
pub(crate) fn kaiser_beta(stopband_db: f64) -> f64 {
    if stopband_db > 50.0 {
        0.1102 * (stopband_db - 8.7)
    } else if stopband_db >= 21.0 {
        0.5842 * (stopband_db - 21.0).powf(0.4) + 0.07886 * (stopband_db - 21.0)
    } else {
        0.0
    }
}

/// Modified Bessel function of the first kind, order zero, by power series.
/// Converges quickly for every argument a Kaiser window produces.
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= (half / k) * (half / k);
        sum += term;
        if term < sum * 1e-16 {
            return sum;
        }
        k += 1.0;
    }
}

pub(crate) fn kaiser_window(len: usize, beta: f64) -> Vec<f64> {
    assert!(len >= 2);
    let denom = bessel_i0(beta);
    let half = (len - 1) as f64 / 2.0;
    (0..len)
        .map(|n| {
            let t = (n as f64 - half) / half; // [-1, 1]
            bessel_i0(beta * (1.0 - t * t).max(0.0).sqrt()) / denom
        })
        .collect()
}

/// Half-width of the design's transition band in Hz, from the Kaiser
/// tap-count relation. Used by callers that must place a stopband edge
/// exactly rather than a -6 dB midpoint.
pub(crate) fn transition_halfwidth_hz(num_taps: usize, stopband_db: f64, sample_rate: f64) -> f64 {
    let dw = (stopband_db - 7.95) / (2.285 * (num_taps - 1) as f64);
    dw / (2.0 * PI) * sample_rate / 2.0
}

/// Linear-phase low-pass with unit DC gain. `cutoff_hz` is the -6 dB point.
pub(crate) fn low_pass(
    num_taps: usize,
    cutoff_hz: f64,
    sample_rate: f64,
    stopband_db: f64,
) -> Vec<f64> {
    assert!(num_taps % 2 == 1, "tap count must be odd for zero-phase use");
    assert!(cutoff_hz > 0.0 && cutoff_hz <= sample_rate / 2.0);
    let beta = kaiser_beta(stopband_db);
    let win = kaiser_window(num_taps, beta);
    let fc = cutoff_hz / sample_rate; // cycles per sample
    let center = (num_taps / 2) as isize;
    let mut taps: Vec<f64> = (0..num_taps)
        .map(|n| {
            let m = n as isize - center;
            let sinc = if m == 0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * m as f64).sin() / (PI * m as f64)
            };
            sinc * win[n]
        })
        .collect();
    // Normalize for exactly unit gain at DC.
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// High-pass by spectral inversion of the matching low-pass. Unit gain at
/// Nyquist, exactly zero gain at DC.
pub(crate) fn high_pass(
    num_taps: usize,
    cutoff_hz: f64,
    sample_rate: f64,
    stopband_db: f64,
) -> Vec<f64> {
    let mut taps = low_pass(num_taps, cutoff_hz, sample_rate, stopband_db);
    for t in taps.iter_mut() {
        *t = -*t;
    }
    let center = taps.len() / 2;
    taps[center] += 1.0;
    taps
}

/// Centered convolution: output length equals input length, edges see zeros.
/// Switches to FFT overlap when the direct product gets expensive.
pub(crate) fn convolve_same(signal: &[f32], taps: &[f64]) -> Vec<f32> {
    assert!(taps.len() % 2 == 1);
    if signal.is_empty() {
        return Vec::new();
    }
    if signal.len().saturating_mul(taps.len()) <= 40_000_000 {
        convolve_same_direct(signal, taps)
    } else {
        convolve_same_fft(signal, taps)
    }
}

fn convolve_same_direct(signal: &[f32], taps: &[f64]) -> Vec<f32> {
    let n = signal.len();
    let half = taps.len() / 2;
    let x: Vec<f64> = signal.iter().map(|&v| f64::from(v)).collect();
    let mut out = vec![0.0f32; n];
    for (i, o) in out.iter_mut().enumerate() {
        // y[i] = sum_k h[k] * x[i + k - half]
        let lo = half.saturating_sub(i);
        let hi = taps.len().min(n + half - i);
        let mut acc = 0.0f64;
        let base = i + lo - half;
        for (k, &h) in taps[lo..hi].iter().enumerate() {
            acc += h * x[base + k];
        }
        *o = acc as f32;
    }
    out
}

fn convolve_same_fft(signal: &[f32], taps: &[f64]) -> Vec<f32> {
    let n = signal.len();
    let half = taps.len() / 2;
    let full = n + taps.len() - 1;
    let size = full.next_power_of_two();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(size);
    let ifft = planner.plan_fft_inverse(size);

    let mut a: Vec<Complex<f64>> = signal
        .iter()
        .map(|&v| Complex::new(f64::from(v), 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut b: Vec<Complex<f64>> = taps
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    fft.process(&mut a);
    fft.process(&mut b);
    let scale = 1.0 / size as f64;
    for (x, y) in a.iter_mut().zip(&b) {
        *x = *x * *y * scale;
    }
    ifft.process(&mut a);
    // The "same" window of the full convolution starts at the filter center.
    a[half..half + n].iter().map(|c| c.re as f32).collect()
}
