//! Butterworth band-pass and biquad notch filters applied forward-backward.

use rustfft::num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// One second-order section `b0 + b1 z^-1 + b2 z^-2 / 1 + a1 z^-1 + a2 z^-2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Complex response at normalized angular frequency `w` (rad/sample).
    pub fn response(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let num = self.b[0] + z1 * self.b[1] + z2 * self.b[2];
        let den = 1.0 + z1 * self.a[0] + z2 * self.a[1];
        num / den
    }

    /// Transposed direct-form-II state reached after a long constant input of 1.
    fn step_state(&self) -> [f64; 2] {
        let dc = (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1]);
        let z2 = self.b[2] - self.a[1] * dc;
        let z1 = self.b[1] - self.a[0] * dc + z2;
        [z1, z2]
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }
}

/// Cascade of second-order sections.
#[derive(Clone, Debug, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

impl Sos {
    /// Number of poles of the cascade.
    pub fn order(&self) -> usize {
        2 * self.sections.len()
    }

    pub fn response(&self, freq: f64, fs: f64) -> Complex64 {
        let w = 2.0 * PI * freq / fs;
        self.sections.iter().map(|s| s.response(w)).product()
    }

    /// Causal filtering with initial state scaled to `x[0]`'s steady state.
    fn filter_steady(&self, x: &mut [f64]) {
        if x.is_empty() {
            return;
        }
        let mut scale = x[0];
        for s in &self.sections {
            let [mut z1, mut z2] = s.step_state().map(|v| v * scale);
            scale *= s.dc_gain();
            for v in x.iter_mut() {
                let xin = *v;
                let y = s.b[0] * xin + z1;
                z1 = s.b[1] * xin - s.a[0] * y + z2;
                z2 = s.b[2] * xin - s.a[1] * y;
                *v = y;
            }
        }
    }

    /// Zero-phase forward-backward filtering with odd-reflection edge padding
    /// of `3 * order` samples (capped at `len - 1`).
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let pad = (3 * self.order()).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        for i in (1..=pad).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 1..=pad {
            ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
        }
        self.filter_steady(&mut ext);
        ext.reverse();
        self.filter_steady(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

fn check_band(freq: f64, fs: f64, what: &str) -> Result<()> {
    let nyquist = fs / 2.0;
    if !(freq > 0.0 && freq < nyquist) {
        return Err(Error::Config(format!(
            "{what} {freq} Hz must lie strictly between 0 and the Nyquist frequency {nyquist} Hz"
        )));
    }
    Ok(())
}

/// Digital Butterworth band-pass from an `order`-pole low-pass prototype
/// (the cascade therefore has `2 * order` poles), via the bilinear transform
/// with pre-warped band edges.
pub fn butter_bandpass(low: f64, high: f64, order: usize, fs: f64) -> Result<Sos> {
    check_band(low, fs, "low band edge")?;
    check_band(high, fs, "high band edge")?;
    if low >= high {
        return Err(Error::Config(format!("band edges {low} >= {high}")));
    }
    if order == 0 || order % 2 != 0 {
        return Err(Error::Config(format!("band-pass prototype order must be even and positive, got {order}")));
    }
    let warp = |f: f64| 2.0 * fs * (PI * f / fs).tan();
    let (w1, w2) = (warp(low), warp(high));
    let bw = w2 - w1;
    let w0 = (w1 * w2).sqrt();

    let mut analog_poles = Vec::with_capacity(2 * order);
    for k in 0..order {
        let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
        let p = Complex64::from_polar(1.0, theta);
        let half = p * (bw / 2.0);
        let root = (half * half - w0 * w0).sqrt();
        analog_poles.push(half + root);
        analog_poles.push(half - root);
    }
    let fs2 = 2.0 * fs;
    let digital: Vec<Complex64> = analog_poles.iter().map(|&p| (fs2 + p) / (fs2 - p)).collect();

    let mut upper: Vec<Complex64> = digital.into_iter().filter(|p| p.im > 0.0).collect();
    if upper.len() != order {
        return Err(Error::Numeric("band-pass design produced unpaired real poles".into()));
    }
    upper.sort_by(|a, b| a.arg().partial_cmp(&b.arg()).expect("finite poles"));

    let centre = 2.0 * (w0 / fs2).atan();
    let sections = upper
        .into_iter()
        .map(|p| {
            let mut s = Biquad {
                b: [1.0, 0.0, -1.0],
                a: [-2.0 * p.re, p.norm_sqr()],
            };
            let g = 1.0 / s.response(centre).norm();
            s.b = s.b.map(|v| v * g);
            s
        })
        .collect();
    Ok(Sos { sections })
}

/// Second-order IIR notch at `f0` with quality factor `q`.
pub fn notch_biquad(f0: f64, q: f64, fs: f64) -> Result<Sos> {
    check_band(f0, fs, "notch frequency")?;
    if q <= 0.0 {
        return Err(Error::Config(format!("notch quality factor must be positive, got {q}")));
    }
    let w0 = 2.0 * PI * f0 / fs;
    let alpha = w0.sin() / (2.0 * q);
    let a0 = 1.0 + alpha;
    let c = -2.0 * w0.cos();
    Ok(Sos {
        sections: vec![Biquad {
            b: [1.0 / a0, c / a0, 1.0 / a0],
            a: [c / a0, (1.0 - alpha) / a0],
        }],
    })
}
