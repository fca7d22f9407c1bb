//! Integer-factor decimation with a Kaiser-windowed FIR anti-alias filter.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Stop-band attenuation targeted by the anti-alias design, in dB.
const STOPBAND_DB: f64 = 60.0;

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn kaiser_beta(atten_db: f64) -> f64 {
    if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * (atten_db - 21.0).powf(0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    }
}

/// Linear-phase low-pass taps with the -6 dB point at `cutoff` Hz and a
/// transition band of `transition` Hz, normalized to unit DC gain.
pub fn kaiser_lowpass(cutoff: f64, transition: f64, fs: f64) -> Vec<f64> {
    let dw = 2.0 * PI * transition / fs;
    let mut taps = ((STOPBAND_DB - 8.0) / (2.285 * dw)).ceil() as usize + 1;
    if taps % 2 == 0 {
        taps += 1;
    }
    let beta = kaiser_beta(STOPBAND_DB);
    let mid = (taps - 1) as f64 / 2.0;
    let fc = cutoff / fs;
    let norm = bessel_i0(beta);
    let mut h: Vec<f64> = (0..taps)
        .map(|i| {
            let t = i as f64 - mid;
            let sinc = if t == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * t).sin() / (PI * t)
            };
            let r = t / mid;
            sinc * bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / norm
        })
        .collect();
    let dc: f64 = h.iter().sum();
    for v in &mut h {
        *v /= dc;
    }
    h
}

/// Decimation plan for one integer factor.
#[derive(Clone, Debug)]
pub struct Decimator {
    pub factor: usize,
    pub taps: Vec<f64>,
}

impl Decimator {
    /// Anti-alias cutoff at 0.8 of the new Nyquist frequency, stop band from
    /// the new Nyquist frequency on.
    pub fn new(source_rate: f64, target_rate: f64) -> Result<Self> {
        if source_rate <= 0.0 || target_rate <= 0.0 {
            return Err(Error::Config("sampling rates must be positive".into()));
        }
        let ratio = source_rate / target_rate;
        let factor = ratio.round();
        if factor < 1.0 || (ratio - factor).abs() > 1e-9 * ratio {
            return Err(Error::Config(format!(
                "resampling {source_rate} Hz to {target_rate} Hz needs an integer decimation factor (got {ratio})"
            )));
        }
        let factor = factor as usize;
        if factor == 1 {
            return Ok(Self { factor, taps: vec![1.0] });
        }
        let nyquist = target_rate / 2.0;
        let cutoff = 0.8 * nyquist;
        let transition = 2.0 * (nyquist - cutoff);
        Ok(Self {
            factor,
            taps: kaiser_lowpass(cutoff, transition, source_rate),
        })
    }

    /// Filtered signal sampled at every `factor`-th input; output length is
    /// `floor(len / factor)`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let out_len = n / self.factor;
        if self.factor == 1 || n == 0 {
            return x.to_vec();
        }
        let half = self.taps.len() / 2;
        let reflect = |i: isize| -> f64 {
            if i < 0 {
                let j = (-i) as usize;
                2.0 * x[0] - x[j.min(n - 1)]
            } else if i as usize >= n {
                let j = i as usize - (n - 1);
                2.0 * x[n - 1] - x[(n - 1).saturating_sub(j)]
            } else {
                x[i as usize]
            }
        };
        (0..out_len)
            .map(|k| {
                let centre = (k * self.factor) as isize;
                self.taps
                    .iter()
                    .enumerate()
                    .map(|(j, &h)| h * reflect(centre + j as isize - half as isize))
                    .sum()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_reference_values() {
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-12);
        assert!((bessel_i0(5.0) - 27.239_871_823_604_45).abs() < 1e-9);
    }

    #[test]
    fn non_integer_ratio_is_rejected() {
        assert!(Decimator::new(1000.0, 300.0).is_err());
        assert_eq!(Decimator::new(1000.0, 250.0).unwrap().factor, 4);
    }

    #[test]
    fn output_length_is_floor() {
        let d = Decimator::new(1000.0, 250.0).unwrap();
        assert_eq!(d.apply(&vec![0.0; 3004]).len(), 751);
        assert_eq!(d.apply(&vec![0.0; 3007]).len(), 751);
        let c = d.apply(&vec![2.5; 1000]);
        assert!(c.iter().all(|v| (v - 2.5).abs() < 1e-12));
    }
}
