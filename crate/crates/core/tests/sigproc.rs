use std::f64::consts::PI;

use era_core::dataset::{synth_generate, ClassLabel, SynthConfig};
use era_core::sigproc::{
    butter_bandpass, notch_biquad, select_channels, welch_psd, Decimator, Recording, WelchConfig, MOTOR24,
};
use era_core::tensor::Tensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tone(freq: f64, fs: f64, n: usize, phase: f64) -> Vec<f64> {
    (0..n).map(|i| (2.0 * PI * freq * i as f64 / fs + phase).sin()).collect()
}

/// Amplitude and phase of the `freq` component over `x[from..from + len]`,
/// where `len` spans a whole number of periods.
fn sinusoid_fit(x: &[f64], freq: f64, fs: f64, from: usize, len: usize) -> (f64, f64) {
    let (mut s, mut c) = (0.0, 0.0);
    for i in from..from + len {
        let w = 2.0 * PI * freq * i as f64 / fs;
        s += x[i] * w.sin();
        c += x[i] * w.cos();
    }
    let (s, c) = (2.0 * s / len as f64, 2.0 * c / len as f64);
    ((s * s + c * c).sqrt(), c.atan2(s))
}

#[test]
fn bandpass_passes_30hz_and_rejects_drift() {
    let fs = 1000.0;
    let sos = butter_bandpass(1.0, 60.0, 4, fs).unwrap();
    let x = tone(30.0, fs, 10_000, 0.3);
    let y = sos.filtfilt(&x);
    let (amp, phase) = sinusoid_fit(&y, 30.0, fs, 2000, 6000);
    assert!((amp - 1.0).abs() < 0.02, "30 Hz gain {amp}");
    assert!((phase - 0.3).abs() < 1e-3, "phase {phase}");

    let fs = 250.0;
    let sos = butter_bandpass(1.0, 60.0, 4, fs).unwrap();
    let n = 250 * 200;
    let y = sos.filtfilt(&tone(0.1, fs, n, 0.0));
    let (amp, _) = sinusoid_fit(&y, 0.1, fs, n / 4, n / 2);
    let db = 20.0 * amp.log10();
    assert!(db <= -20.0, "0.1 Hz attenuation {db} dB");
    let h = sos.response(0.1, fs).norm().powi(2);
    assert!(20.0 * h.log10() <= -20.0);
}

#[test]
fn notch_removes_line_noise() {
    let fs = 1000.0;
    let sos = notch_biquad(60.0, 30.0, fs).unwrap();
    let y = sos.filtfilt(&tone(60.0, fs, 10_000, 0.0));
    let (amp, _) = sinusoid_fit(&y, 60.0, fs, 2000, 6000);
    assert!(amp < 0.03, "residual {amp}");
    let y = sos.filtfilt(&tone(10.0, fs, 10_000, 0.0));
    let (amp, _) = sinusoid_fit(&y, 10.0, fs, 2000, 6000);
    assert!((amp - 1.0).abs() < 0.01);
}

#[test]
fn decimation_keeps_20hz_and_length() {
    let dec = Decimator::new(1000.0, 250.0).unwrap();
    let y = dec.apply(&tone(20.0, 1000.0, 3004, 0.0));
    assert_eq!(y.len(), 751);
    let (amp, _) = sinusoid_fit(&y, 20.0, 250.0, 100, 500);
    assert!((amp - 1.0).abs() < 0.01, "20 Hz amplitude {amp}");
    let alias = dec.apply(&tone(180.0, 1000.0, 3004, 0.0));
    let (amp, _) = sinusoid_fit(&alias, 70.0, 250.0, 100, 500);
    assert!(amp < 0.01, "aliased 180 Hz leaks {amp}");
}

#[test]
fn welch_peak_sits_on_the_tone_bin() {
    let fs = 250.0;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x: Vec<f64> = tone(13.0, fs, 2500, 0.0)
        .into_iter()
        .map(|v| 2.0 * v + 0.3 * rng.gen_range(-1.0..1.0))
        .collect();
    let est = welch_psd(&Tensor::new(&[1, 2500], x).unwrap(), fs, WelchConfig::one_second(fs)).unwrap();
    let p = est.power.data();
    let peak = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
    assert_eq!(est.frequencies[peak], 13.0);
}

#[test]
fn welch_density_integrates_to_variance() {
    let fs = 250.0;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x: Vec<f64> = (0..25_000).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    let est = welch_psd(&Tensor::new(&[1, x.len()], x).unwrap(), fs, WelchConfig::one_second(fs)).unwrap();
    let total: f64 = est.power.data().iter().sum::<f64>() * est.bin_width();
    assert!((total / var - 1.0).abs() < 0.03, "{total} vs {var}");
}

#[test]
fn synthetic_classes_separate_in_mu_power() {
    let cfg = SynthConfig {
        snr: 5.0,
        classes: vec![ClassLabel::Rest, ClassLabel::ReachLeft],
        trials_per_class: 50,
        seed: 11,
        ..SynthConfig::default()
    };
    let set = synth_generate(&cfg).unwrap();
    let map = &cfg.erd_maps[ClassLabel::ReachLeft.index()];
    let ch = (0..map.len()).max_by(|&a, &b| map[a].total_cmp(&map[b])).unwrap();
    let mut groups = [Vec::new(), Vec::new()];
    for i in 0..set.len() {
        let row = set.trial(i)[ch * set.samples()..(ch + 1) * set.samples()].to_vec();
        let est = welch_psd(&Tensor::new(&[1, set.samples()], row).unwrap(), 250.0, WelchConfig::one_second(250.0)).unwrap();
        groups[usize::from(set.labels[i] == ClassLabel::ReachLeft)].push(est.band_mean(0, 8.0, 12.0));
    }
    let stats = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        (m, var / v.len() as f64)
    };
    let ((m0, se0), (m1, se1)) = (stats(&groups[0]), stats(&groups[1]));
    let z = (m0 - m1) / (se0 + se1).sqrt();
    assert!(z > 3.0, "separation {z} standard errors");
}

#[test]
fn vanishing_snr_erases_the_class_difference() {
    let mk = |snr: f64| {
        let cfg = SynthConfig {
            snr,
            classes: vec![ClassLabel::Rest, ClassLabel::ReachLeft],
            trials_per_class: 30,
            seed: 5,
            ..SynthConfig::default()
        };
        let set = synth_generate(&cfg).unwrap();
        let ch = MOTOR24.iter().position(|&c| c == "C3").unwrap();
        let mut sums = [0.0; 2];
        for i in 0..set.len() {
            let row = set.trial(i)[ch * set.samples()..(ch + 1) * set.samples()].to_vec();
            let est = welch_psd(&Tensor::new(&[1, set.samples()], row).unwrap(), 250.0, WelchConfig::one_second(250.0)).unwrap();
            sums[usize::from(set.labels[i] == ClassLabel::ReachLeft)] += est.band_mean(0, 8.0, 12.0) / 30.0;
        }
        (sums[0] - sums[1]).abs() / sums[0]
    };
    assert!(mk(1e-3) < 0.05 * mk(5.0));
}

fn recording(channels: usize, samples: usize, seed: u64) -> Recording {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Recording::new(
        Tensor::from_fn(&[channels, samples], |_| rng.gen_range(-1.0..1.0)),
        250.0,
        (0..channels).map(|i| format!("E{i}")).collect(),
        vec![],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn filtering_is_linear(seed in 0u64..500, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..400).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..400).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sos = butter_bandpass(4.0, 40.0, 4, 250.0).unwrap();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let (fx, fy, fm) = (sos.filtfilt(&x), sos.filtfilt(&y), sos.filtfilt(&mix));
        for i in 0..400 {
            prop_assert!((fm[i] - (a * fx[i] + b * fy[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn passband_tones_keep_their_phase(freq in 8.0f64..30.0, phase in -3.0f64..3.0) {
        let fs = 250.0;
        let sos = butter_bandpass(4.0, 40.0, 4, fs).unwrap();
        let y = sos.filtfilt(&tone(freq, fs, 5000, phase));
        let x = tone(freq, fs, 5000, phase);
        let err = y[1500..3500].iter().zip(&x[1500..3500]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let gain = sos.response(freq, fs).norm_sqr();
        prop_assert!(err < (1.0 - gain).abs() + 1e-3, "err {} gain {}", err, gain);
    }

    #[test]
    fn channel_selection_is_idempotent(seed in 0u64..100, picks in prop::collection::vec(0usize..6, 1..6)) {
        let rec = recording(6, 20, seed);
        let mut wanted: Vec<String> = picks.iter().map(|i| format!("E{i}")).collect();
        wanted.dedup();
        let once = select_channels(&rec, &wanted).unwrap();
        let twice = select_channels(&once, &wanted).unwrap();
        prop_assert_eq!(&once, &twice);
        for (k, name) in wanted.iter().enumerate() {
            let src = rec.channel_names.iter().position(|c| c == name).unwrap();
            prop_assert_eq!(once.channel(k), rec.channel(src));
        }
    }
}
