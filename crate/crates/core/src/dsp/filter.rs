//! Butterworth designs as second-order sections, causal filtering and
//! forward-backward (zero-phase) filtering.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};

/// One biquad, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sos {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Sos {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        let num = self.b[0] + z_inv * self.b[1] + z2 * self.b[2];
        let den = Complex64::new(1.0, 0.0) + z_inv * self.a[0] + z2 * self.a[1];
        num / den
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }
}

/// Frequency response magnitude of a cascade at `f` Hz.
pub fn magnitude(sos: &[Sos], f: f64, fs: f64) -> f64 {
    let z_inv = Complex64::from_polar(1.0, -2.0 * PI * f / fs);
    sos.iter()
        .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
        .norm()
}

fn prototype_poles(order: usize) -> Vec<Complex64> {
    (0..order)
        .map(|k| {
            let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            Complex64::from_polar(1.0, theta)
        })
        .collect()
}

fn bilinear(s: Complex64, fs: f64) -> Complex64 {
    let two_fs = Complex64::new(2.0 * fs, 0.0);
    (two_fs + s) / (two_fs - s)
}

fn prewarp(f: f64, fs: f64) -> f64 {
    2.0 * fs * (PI * f / fs).tan()
}

fn check_edge(name: &str, f: f64, fs: f64) -> Result<()> {
    if !(f > 0.0 && f < fs / 2.0) {
        return Err(Error::param(name, format!("{f} Hz must lie in (0, {}) Hz", fs / 2.0)));
    }
    Ok(())
}

/// Pair digital poles into biquad denominators. Real poles are paired with
/// each other; a leftover real pole yields a first-order denominator.
fn pole_sections(poles: &[Complex64]) -> Vec<[f64; 2]> {
    let mut complex: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > 1e-12).collect();
    complex.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
    let mut real: Vec<f64> = poles.iter().filter(|p| p.im.abs() <= 1e-12).map(|p| p.re).collect();
    real.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<[f64; 2]> = complex.iter().map(|p| [-2.0 * p.re, p.norm_sqr()]).collect();
    for pair in real.chunks(2) {
        match pair {
            [p, q] => out.push([-(p + q), p * q]),
            [p] => out.push([-p, 0.0]),
            _ => unreachable!(),
        }
    }
    out
}

fn normalize(mut sos: Vec<Sos>, f: f64, fs: f64) -> Vec<Sos> {
    let g = magnitude(&sos, f, fs);
    let per = g.powf(-1.0 / sos.len() as f64);
    for s in &mut sos {
        for b in &mut s.b {
            *b *= per;
        }
    }
    sos
}

/// Low-pass Butterworth of the given order with unit DC gain.
pub fn butter_lowpass(order: usize, cutoff: f64, fs: f64) -> Result<Vec<Sos>> {
    if order == 0 {
        return Err(Error::param("order", "must be >= 1"));
    }
    check_edge("cutoff", cutoff, fs)?;
    let wc = prewarp(cutoff, fs);
    let poles: Vec<Complex64> = prototype_poles(order)
        .into_iter()
        .map(|p| bilinear(p * wc, fs))
        .collect();
    let sos = pole_sections(&poles)
        .into_iter()
        .map(|a| {
            let b = if a[1] == 0.0 { [1.0, 1.0, 0.0] } else { [1.0, 2.0, 1.0] };
            Sos { b, a }
        })
        .collect();
    Ok(normalize(sos, 0.0, fs))
}

/// Band-pass Butterworth from an order-`order` prototype (`2*order` poles),
/// unit gain at the band center.
pub fn butter_bandpass(order: usize, lo: f64, hi: f64, fs: f64) -> Result<Vec<Sos>> {
    if order == 0 {
        return Err(Error::param("order", "must be >= 1"));
    }
    check_edge("band_lo", lo, fs)?;
    check_edge("band_hi", hi, fs)?;
    if lo >= hi {
        return Err(Error::param("band", format!("lower edge {lo} must be below upper edge {hi}")));
    }
    let w1 = prewarp(lo, fs);
    let w2 = prewarp(hi, fs);
    let w0 = (w1 * w2).sqrt();
    let bw = w2 - w1;
    let mut poles = Vec::with_capacity(2 * order);
    for p in prototype_poles(order) {
        let half = p * (bw / 2.0);
        let disc = (half * half - w0 * w0).sqrt();
        poles.push(bilinear(half + disc, fs));
        poles.push(bilinear(half - disc, fs));
    }
    let sos = pole_sections(&poles)
        .into_iter()
        .map(|a| Sos { b: [1.0, 0.0, -1.0], a })
        .collect();
    let center = fs / PI * (w0 / (2.0 * fs)).atan();
    Ok(normalize(sos, center, fs))
}

/// Steady-state section states for a unit-step input.
fn steady_state(sos: &[Sos]) -> Vec<[f64; 2]> {
    let mut scale = 1.0;
    sos.iter()
        .map(|s| {
            let h = s.dc_gain();
            let z2 = s.b[2] - s.a[1] * h;
            let z1 = h - s.b[0];
            let zi = [z1 * scale, z2 * scale];
            scale *= h;
            zi
        })
        .collect()
}

fn sosfilt_in_place(sos: &[Sos], x: &mut [f64], zi: Option<(&[[f64; 2]], f64)>) {
    for (i, s) in sos.iter().enumerate() {
        let (mut z1, mut z2) = match zi {
            Some((zi, x0)) => (zi[i][0] * x0, zi[i][1] * x0),
            None => (0.0, 0.0),
        };
        for v in x.iter_mut() {
            let input = *v;
            let y = s.b[0] * input + z1;
            z1 = s.b[1] * input - s.a[0] * y + z2;
            z2 = s.b[2] * input - s.a[1] * y;
            *v = y;
        }
    }
}

/// Causal filtering from rest.
pub fn sosfilt(sos: &[Sos], x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    sosfilt_in_place(sos, &mut y, None);
    y
}

/// Zero-phase forward-backward filtering with odd-reflection padding and
/// steady-state initial conditions.
pub fn sosfiltfilt(sos: &[Sos], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let padlen = (3 * (2 * sos.len() + 1)).min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * padlen);
    for i in (1..=padlen).rev() {
        ext.push(2.0 * x[0] - x[i]);
    }
    ext.extend_from_slice(x);
    for i in 1..=padlen {
        ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
    }
    let zi = steady_state(sos);
    let x0 = ext[0];
    sosfilt_in_place(sos, &mut ext, Some((&zi, x0)));
    ext.reverse();
    let y0 = ext[0];
    sosfilt_in_place(sos, &mut ext, Some((&zi, y0)));
    ext.reverse();
    ext[padlen..padlen + n].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowpass_response() {
        let sos = butter_lowpass(4, 8.0, 1000.0).unwrap();
        assert!((magnitude(&sos, 0.0, 1000.0) - 1.0).abs() < 1e-12);
        let at_cut = magnitude(&sos, 8.0, 1000.0);
        assert!((at_cut - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6, "{at_cut}");
        assert!(magnitude(&sos, 80.0, 1000.0) < 1e-3);
    }

    #[test]
    fn bandpass_response() {
        let sos = butter_bandpass(4, 20.0, 150.0, 1000.0).unwrap();
        assert_eq!(sos.len(), 4);
        for f in [20.0, 150.0] {
            let m = magnitude(&sos, f, 1000.0);
            assert!((m - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6, "{f}: {m}");
        }
        assert!(magnitude(&sos, 0.0, 1000.0) < 1e-12);
        assert!(magnitude(&sos, 2.0, 1000.0) < 2e-4);
        assert!(magnitude(&sos, 60.0, 1000.0) > 0.99);
    }

    #[test]
    fn odd_order_lowpass() {
        let sos = butter_lowpass(3, 50.0, 1000.0).unwrap();
        assert_eq!(sos.len(), 2);
        assert!((magnitude(&sos, 50.0, 1000.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
    }

    #[test]
    fn filtfilt_keeps_constant_and_is_symmetric() {
        let sos = butter_lowpass(4, 10.0, 1000.0).unwrap();
        let y = sosfiltfilt(&sos, &vec![2.5; 3000]);
        assert!(y.iter().all(|v| (v - 2.5).abs() < 1e-9));

        let bp = butter_bandpass(4, 20.0, 150.0, 1000.0).unwrap();
        let mut x = vec![0.0; 2001];
        x[1000] = 1.0;
        let y = sosfiltfilt(&bp, &x);
        for k in 1..400 {
            assert!((y[1000 - k] - y[1000 + k]).abs() < 1e-10, "lag {k}");
        }
    }

    #[test]
    fn rejects_edges_above_nyquist() {
        assert!(butter_bandpass(4, 20.0, 160.0, 300.0).is_err());
        assert!(butter_lowpass(4, 0.0, 300.0).is_err());
    }
}
