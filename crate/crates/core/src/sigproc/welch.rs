//! Welch power spectral density: Hann-windowed, mean-detrended, averaged
//! periodograms with one-sided density scaling.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelchConfig {
    /// Segment length in samples.
    pub segment: usize,
    /// Fractional overlap between consecutive segments, in `[0, 1)`.
    pub overlap: f64,
}

impl WelchConfig {
    /// One-second segments with 50% overlap.
    pub fn one_second(fs: f64) -> Self {
        Self {
            segment: fs.round() as usize,
            overlap: 0.5,
        }
    }
}

/// Spectral density per channel: `power` is `[channels, bins]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PsdEstimate {
    pub frequencies: Vec<f64>,
    pub power: Tensor<f64>,
}

impl PsdEstimate {
    pub fn bin_width(&self) -> f64 {
        self.frequencies.get(1).copied().unwrap_or(0.0)
    }

    /// Mean density over `[lo, hi]` Hz for one channel.
    pub fn band_mean(&self, channel: usize, lo: f64, hi: f64) -> f64 {
        let bins = self.frequencies.len();
        let row = &self.power.data()[channel * bins..(channel + 1) * bins];
        let sel: Vec<f64> = self
            .frequencies
            .iter()
            .zip(row)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(_, p)| *p)
            .collect();
        if sel.is_empty() {
            0.0
        } else {
            sel.iter().sum::<f64>() / sel.len() as f64
        }
    }
}

fn hann_periodic(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Welch estimate of a `[channels, samples]` signal sampled at `fs`.
pub fn welch_psd(signal: &Tensor<f64>, fs: f64, cfg: WelchConfig) -> Result<PsdEstimate> {
    if signal.ndim() != 2 {
        return Err(Error::shape("welch_psd", format!("expected [channels, samples], got {:?}", signal.shape())));
    }
    let (channels, samples) = (signal.shape()[0], signal.shape()[1]);
    let seg = cfg.segment;
    if seg < 2 || seg > samples {
        return Err(Error::Config(format!(
            "segment of {seg} samples does not fit a signal of {samples} samples"
        )));
    }
    if !(0.0..1.0).contains(&cfg.overlap) {
        return Err(Error::Config(format!("overlap {} outside [0, 1)", cfg.overlap)));
    }
    let step = ((seg as f64 * (1.0 - cfg.overlap)).round() as usize).max(1);
    let n_segments = (samples - seg) / step + 1;
    let bins = seg / 2 + 1;
    let window = hann_periodic(seg);
    let win_power: f64 = window.iter().map(|w| w * w).sum();
    let scale = 1.0 / (fs * win_power * n_segments as f64);

    let fft = FftPlanner::<f64>::new().plan_fft_forward(seg);
    let mut buf = vec![Complex64::new(0.0, 0.0); seg];
    let mut power = vec![0.0; channels * bins];
    for ch in 0..channels {
        let x = &signal.data()[ch * samples..(ch + 1) * samples];
        let acc = &mut power[ch * bins..(ch + 1) * bins];
        for s in 0..n_segments {
            let part = &x[s * step..s * step + seg];
            let mean = part.iter().sum::<f64>() / seg as f64;
            for ((b, &v), &w) in buf.iter_mut().zip(part).zip(&window) {
                *b = Complex64::new((v - mean) * w, 0.0);
            }
            fft.process(&mut buf);
            for (k, a) in acc.iter_mut().enumerate() {
                let onesided = if k == 0 || (seg % 2 == 0 && k == seg / 2) { 1.0 } else { 2.0 };
                *a += onesided * buf[k].norm_sqr() * scale;
            }
        }
    }
    Ok(PsdEstimate {
        frequencies: (0..bins).map(|k| k as f64 * fs / seg as f64).collect(),
        power: Tensor::new(&[channels, bins], power)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_layout() {
        let x = Tensor::zeros(&[2, 751]);
        let p = welch_psd(&x, 250.0, WelchConfig::one_second(250.0)).unwrap();
        assert_eq!(p.frequencies.len(), 126);
        assert_eq!(p.power.shape(), &[2, 126]);
        assert!((p.frequencies[40] - 40.0).abs() < 1e-12);
        assert!(p.power.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn segment_longer_than_signal_fails() {
        let x = Tensor::zeros(&[1, 100]);
        assert!(welch_psd(&x, 250.0, WelchConfig::one_second(250.0)).is_err());
    }
}
