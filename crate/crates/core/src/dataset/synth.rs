//! Synthetic motor-imagery EEG: pink background noise plus a mu rhythm (with a
//! beta harmonic) whose per-channel amplitude is reduced by a class-specific
//! desynchronization map.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::epochs::EpochSet;
use super::taxonomy::ClassLabel;
use crate::error::{Error, Result};
use crate::sigproc::{Event, Recording, MOTOR24};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Desynchronization depth per channel in `[0, 1]`, one map per class in
    /// `ClassLabel::ALL` order. A depth of 1 removes the rhythm entirely.
    pub erd_maps: Vec<Vec<f64>>,
    /// Classes to generate, in the round-robin order used for trial layout.
    pub classes: Vec<ClassLabel>,
    pub samples: usize,
    pub sampling_rate: f64,
    pub mu_center: f64,
    /// Per-trial mu frequency is uniform in `center ± width / 2`.
    pub mu_width: f64,
    /// Beta harmonic amplitude relative to mu.
    pub beta_ratio: f64,
    /// Background power falls as `1 / f^exponent`.
    pub noise_exponent: f64,
    /// Unattenuated rhythm amplitude in units of the background standard deviation.
    pub snr: f64,
    pub trials_per_class: usize,
    pub seed: u64,
    pub subject: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            erd_maps: default_erd_maps(),
            classes: ClassLabel::ALL.to_vec(),
            samples: 751,
            sampling_rate: 250.0,
            mu_center: 10.0,
            mu_width: 2.0,
            beta_ratio: 0.5,
            noise_exponent: 1.0,
            snr: 5.0,
            trials_per_class: 50,
            seed: 0,
            subject: "synthetic".into(),
        }
    }
}

fn channel(name: &str) -> usize {
    MOTOR24.iter().position(|&c| c == name).expect("motor24 channel")
}

/// Built-in maps over the motor24 montage. Arm classes share a left
/// central focus, hand classes a right central focus, and every fine class
/// adds its own pair of deeper channels; rest has no desynchronization.
pub fn default_erd_maps() -> Vec<Vec<f64>> {
    let region = |names: &[&str], depth: f64, map: &mut Vec<f64>| {
        for n in names {
            map[channel(n)] += depth;
        }
    };
    let arm_focus = ["FC3", "C3", "CP3", "C1"];
    let hand_focus = ["FC4", "C4", "CP4", "C2"];
    ClassLabel::ALL
        .iter()
        .map(|label| {
            let mut map = vec![0.0; MOTOR24.len()];
            let (focus, extra): (&[&str], &[&str]) = match label {
                ClassLabel::ReachLeft => (&arm_focus, &["F3", "F1"]),
                ClassLabel::ReachRight => (&arm_focus, &["F2", "F4"]),
                ClassLabel::ReachForward => (&arm_focus, &["FC1", "Cz"]),
                ClassLabel::ReachBackward => (&arm_focus, &["CPz", "CP1"]),
                ClassLabel::ReachUp => (&arm_focus, &["P3", "P1"]),
                ClassLabel::ReachDown => (&arm_focus, &["P2", "P4"]),
                ClassLabel::Grasp => (&hand_focus, &["Fz", "FC2"]),
                ClassLabel::Twist => (&hand_focus, &["CP2", "Pz"]),
                ClassLabel::Rest => (&[], &[]),
            };
            region(focus, 0.5, &mut map);
            region(extra, 0.45, &mut map);
            map
        })
        .collect()
}

impl SynthConfig {
    pub fn channels(&self) -> usize {
        self.erd_maps.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.snr > 0.0) {
            return Err(Error::Config(format!("SNR must be positive, got {}", self.snr)));
        }
        if self.erd_maps.len() != ClassLabel::ALL.len() {
            return Err(Error::Config(format!("expected 9 ERD maps, got {}", self.erd_maps.len())));
        }
        let ch = self.channels();
        if ch == 0 || self.erd_maps.iter().any(|m| m.len() != ch) {
            return Err(Error::Config("ERD maps must share one non-zero channel count".into()));
        }
        if self.erd_maps.iter().flatten().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::Config("ERD depths must lie in [0, 1]".into()));
        }
        for (i, a) in self.classes.iter().enumerate() {
            for b in &self.classes[i + 1..] {
                if a == b {
                    return Err(Error::Config(format!("class {a} listed twice")));
                }
                let ma = &self.erd_maps[a.index()];
                let mb = &self.erd_maps[b.index()];
                let dist: f64 = ma.iter().zip(mb).map(|(x, y)| (x - y).powi(2)).sum();
                if dist == 0.0 {
                    return Err(Error::Config(format!("classes {a} and {b} share an identical ERD map")));
                }
            }
        }
        if self.samples < 2 || !(self.sampling_rate > 0.0) || self.trials_per_class == 0 {
            return Err(Error::Config("samples, sampling rate and trial count must be positive".into()));
        }
        if self.mu_width < 0.0 || self.mu_center - self.mu_width / 2.0 <= 0.0 {
            return Err(Error::Config("mu band must stay above 0 Hz".into()));
        }
        Ok(())
    }
}

/// Unit-variance noise with power spectrum `∝ 1 / f^exponent`.
fn pink_noise(n: usize, exponent: f64, fs: f64, rng: &mut impl Rng, fft: &mut FftPlanner<f64>) -> Vec<f64> {
    let mut buf: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.sample(StandardNormal), 0.0))
        .collect();
    fft.plan_fft_forward(n).process(&mut buf);
    buf[0] = Complex64::new(0.0, 0.0);
    for (k, v) in buf.iter_mut().enumerate().skip(1) {
        let bin = k.min(n - k) as f64;
        let f = bin * fs / n as f64;
        *v *= f.powf(-exponent / 2.0);
    }
    fft.plan_fft_inverse(n).process(&mut buf);
    let mut x: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let mean = x.iter().sum::<f64>() / n as f64;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    for v in &mut x {
        *v = (*v - mean) / sd;
    }
    x
}

/// Generates `trials_per_class` trials for every configured class, laid out
/// round-robin over classes. Trial `i` draws from its own ChaCha stream `i`
/// of the configured seed.
pub fn synth_generate(cfg: &SynthConfig) -> Result<EpochSet> {
    cfg.validate()?;
    let channels = cfg.channels();
    let n = cfg.samples;
    let total = cfg.trials_per_class * cfg.classes.len();
    let mut data = Vec::with_capacity(total * channels * n);
    let mut labels = Vec::with_capacity(total);
    let mut planner = FftPlanner::new();

    for trial in 0..total {
        let label = cfg.classes[trial % cfg.classes.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(trial as u64);

        let f_mu = cfg.mu_center + cfg.mu_width * (rng.gen::<f64>() - 0.5);
        let phase_mu = rng.gen::<f64>() * 2.0 * PI;
        let phase_beta = rng.gen::<f64>() * 2.0 * PI;
        let rhythm: Vec<f64> = (0..n)
            .map(|t| {
                let time = t as f64 / cfg.sampling_rate;
                (2.0 * PI * f_mu * time + phase_mu).sin()
                    + cfg.beta_ratio * (2.0 * PI * 2.0 * f_mu * time + phase_beta).sin()
            })
            .collect();

        let map = &cfg.erd_maps[label.index()];
        for &depth in map {
            let amp = cfg.snr * (1.0 - depth);
            let noise = pink_noise(n, cfg.noise_exponent, cfg.sampling_rate, &mut rng, &mut planner);
            data.extend(noise.iter().zip(&rhythm).map(|(z, r)| z + amp * r));
        }
        labels.push(label);
    }
    EpochSet::new(
        Tensor::new(&[total, channels, n], data)?,
        labels,
        cfg.subject.clone(),
        cfg.sampling_rate,
    )
}

/// Continuous recording at `raw_rate` holding every synthetic trial back to
/// back, one cue event per trial, with an optional 60 Hz line component.
/// `raw_rate` must be an integer multiple of the configured sampling rate so
/// that decimation recovers `samples`-long epochs.
pub fn synth_recording(cfg: &SynthConfig, raw_rate: f64, line_noise: f64) -> Result<Recording> {
    let ratio = raw_rate / cfg.sampling_rate;
    if !(ratio >= 1.0) || (ratio - ratio.round()).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "raw rate {raw_rate} Hz is not an integer multiple of {} Hz",
            cfg.sampling_rate
        )));
    }
    let factor = ratio.round() as usize;
    let raw = synth_generate(&SynthConfig {
        samples: cfg.samples * factor,
        sampling_rate: raw_rate,
        ..cfg.clone()
    })?;
    let (trials, channels, len) = (raw.len(), raw.channels(), raw.samples());
    let total = trials * len;
    let mut data = vec![0.0; channels * total];
    for t in 0..trials {
        let trial = raw.trial(t);
        for c in 0..channels {
            let dst = &mut data[c * total + t * len..c * total + (t + 1) * len];
            dst.copy_from_slice(&trial[c * len..(c + 1) * len]);
        }
    }
    if line_noise != 0.0 {
        for row in data.chunks_mut(total) {
            for (i, v) in row.iter_mut().enumerate() {
                *v += line_noise * (2.0 * PI * 60.0 * i as f64 / raw_rate).sin();
            }
        }
    }
    let events = raw
        .labels
        .iter()
        .enumerate()
        .map(|(t, l)| Event {
            sample: t * len,
            label: l.name().to_string(),
        })
        .collect();
    Recording::new(
        Tensor::new(&[channels, total], data)?,
        raw_rate,
        MOTOR24.iter().map(|s| s.to_string()).collect(),
        events,
    )
}
