//! FFT-backed helpers: linear convolution, analytic signal, autocorrelation
//! and brick-wall band limiting.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

fn forward(buf: &mut [Complex64]) {
    FftPlanner::new().plan_fft_forward(buf.len()).process(buf);
}

fn inverse(buf: &mut [Complex64]) {
    FftPlanner::new().plan_fft_inverse(buf.len()).process(buf);
    let scale = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

fn to_complex(x: &[f64], len: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (b, v) in buf.iter_mut().zip(x) {
        b.re = *v;
    }
    buf
}

/// Full linear convolution, `len(a) + len(b) - 1` samples, by direct sums.
pub fn direct_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, av) in a.iter().enumerate() {
        for (j, bv) in b.iter().enumerate() {
            out[i + j] += av * bv;
        }
    }
    out
}

/// Full linear convolution through zero-padded FFTs.
pub fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let n = a.len() + b.len() - 1;
    let size = n.next_power_of_two();
    let mut fa = to_complex(a, size);
    let mut fb = to_complex(b, size);
    forward(&mut fa);
    forward(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inverse(&mut fa);
    fa.truncate(n);
    fa.into_iter().map(|c| c.re).collect()
}

/// Magnitude of the analytic signal (Hilbert envelope).
pub fn analytic_magnitude(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf = to_complex(x, n);
    forward(&mut buf);
    // one-sided spectrum: keep DC (and Nyquist for even n), double positives
    let half = n / 2;
    for (k, v) in buf.iter_mut().enumerate() {
        if k == 0 || (n % 2 == 0 && k == half) {
            continue;
        } else if k < (n + 1) / 2 {
            *v *= 2.0;
        } else {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    inverse(&mut buf);
    buf.into_iter().map(|c| c.norm()).collect()
}

/// Biased autocorrelation `r[k] = sum_n x[n] x[n+k] / N` for `k < N`.
pub fn autocorrelation(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let size = (2 * n).next_power_of_two();
    let mut buf = to_complex(x, size);
    forward(&mut buf);
    for v in buf.iter_mut() {
        *v = Complex64::new(v.norm_sqr(), 0.0);
    }
    inverse(&mut buf);
    buf.truncate(n);
    buf.into_iter().map(|c| c.re / n as f64).collect()
}

/// Keep only spectral content with `lo <= |f| <= hi` (DC removed when
/// `lo > 0`). Exact band limitation of a finite record.
pub fn brickwall(x: &[f64], fs: f64, lo: f64, hi: f64) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf = to_complex(x, n);
    forward(&mut buf);
    let df = fs / n as f64;
    for (k, v) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * df;
        let keep = f <= hi && (f >= lo) && !(lo > 0.0 && k == 0);
        if !keep {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    inverse(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

/// Power spectrum `|X[k]|^2` of a real record for `k = 0..=N/2`.
pub fn power_spectrum(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut buf = to_complex(x, n);
    forward(&mut buf);
    buf.truncate(n / 2 + 1);
    buf.into_iter().map(|c| c.norm_sqr()).collect()
}
