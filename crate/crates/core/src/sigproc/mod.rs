//! EEG preprocessing: notch, band-pass, decimation, channel selection,
//! epoching, and Welch spectra.

pub mod filter;
pub mod resample;
pub mod welch;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{ClassLabel, EpochSet};
use crate::error::{Error, Result};
use crate::io;
use crate::tensor::Tensor;

pub use filter::{butter_bandpass, notch_biquad, Biquad, Sos};
pub use resample::Decimator;
pub use welch::{welch_psd, PsdEstimate, WelchConfig};

/// The 24 motor-cortex electrodes, in montage order.
pub const MOTOR24: [&str; 24] = [
    "F3", "F1", "Fz", "F2", "F4", "FC3", "FC1", "FC2", "FC4", "C3", "C1", "Cz", "C2", "C4", "CP3", "CP1", "CPz",
    "CP2", "CP4", "P3", "P1", "Pz", "P2", "P4",
];

/// Resolves a montage name (currently only `motor24`).
pub fn montage(name: &str) -> Result<Vec<String>> {
    match name {
        "motor24" => Ok(MOTOR24.iter().map(|s| s.to_string()).collect()),
        other => Err(Error::Config(format!("unknown montage {other:?}"))),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub sample: usize,
    pub label: String,
}

/// Continuous multi-channel EEG in microvolts: `data` is `[channels, samples]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    pub data: Tensor<f64>,
    pub sampling_rate: f64,
    pub channel_names: Vec<String>,
    pub events: Vec<Event>,
}

pub const RECORDING_FILE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct RecordingHeader {
    version: u32,
    sampling_rate: f64,
    channel_names: Vec<String>,
    events: Vec<Event>,
}

impl Recording {
    pub fn new(data: Tensor<f64>, sampling_rate: f64, channel_names: Vec<String>, events: Vec<Event>) -> Result<Self> {
        if data.ndim() != 2 {
            return Err(Error::Data(format!("recording must be [channels, samples], got {:?}", data.shape())));
        }
        if channel_names.len() != data.shape()[0] {
            return Err(Error::Data(format!(
                "{} channel names for {} channels",
                channel_names.len(),
                data.shape()[0]
            )));
        }
        if !(sampling_rate > 0.0) {
            return Err(Error::Data(format!("sampling rate must be positive, got {sampling_rate}")));
        }
        if let Some(e) = events.iter().find(|e| e.sample >= data.shape()[1]) {
            return Err(Error::Data(format!(
                "event {:?} at sample {} is beyond the recording end ({})",
                e.label,
                e.sample,
                data.shape()[1]
            )));
        }
        Ok(Self {
            data,
            sampling_rate,
            channel_names,
            events,
        })
    }

    pub fn channels(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn samples(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        let n = self.samples();
        &self.data.data()[i * n..(i + 1) * n]
    }

    /// Applies `f` channel by channel; the output length may differ from the input.
    fn map_channels(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Tensor<f64>> {
        let rows: Vec<Vec<f64>> = (0..self.channels()).map(|c| f(self.channel(c))).collect();
        let len = rows.first().map_or(0, Vec::len);
        Tensor::new(&[rows.len(), len], rows.concat())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let header = RecordingHeader {
            version: RECORDING_FILE_VERSION,
            sampling_rate: self.sampling_rate,
            channel_names: self.channel_names.clone(),
            events: self.events.clone(),
        };
        io::write_framed(path, &header, self.data.data())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let (header, payload): (RecordingHeader, _) = io::read_framed(path)?;
        io::check_version(path, header.version, RECORDING_FILE_VERSION)?;
        let channels = header.channel_names.len();
        if channels == 0 {
            return Err(Error::MalformedHeader {
                path: path.to_path_buf(),
                detail: "no channels".into(),
            });
        }
        let row_bytes = channels * 8;
        let samples = payload.len().div_ceil(row_bytes);
        let data = io::decode_f64(path, &payload, channels * samples)?;
        Self::new(
            Tensor::new(&[channels, samples], data)?,
            header.sampling_rate,
            header.channel_names,
            header.events,
        )
    }
}

/// Zero-phase Butterworth band-pass (`order`-pole prototype) on every channel.
pub fn bandpass(rec: &Recording, low: f64, high: f64, order: usize) -> Result<Recording> {
    let sos = butter_bandpass(low, high, order, rec.sampling_rate)?;
    Ok(Recording {
        data: rec.map_channels(|x| sos.filtfilt(x))?,
        ..rec.clone()
    })
}

/// Zero-phase biquad notch on every channel.
pub fn notch(rec: &Recording, f0: f64, q: f64) -> Result<Recording> {
    let sos = notch_biquad(f0, q, rec.sampling_rate)?;
    Ok(Recording {
        data: rec.map_channels(|x| sos.filtfilt(x))?,
        ..rec.clone()
    })
}

/// Integer-factor decimation to `target` Hz; event indices are divided by the factor.
pub fn resample(rec: &Recording, target: f64) -> Result<Recording> {
    let dec = Decimator::new(rec.sampling_rate, target)?;
    let data = rec.map_channels(|x| dec.apply(x))?;
    let samples = data.shape()[1];
    let events = rec
        .events
        .iter()
        .map(|e| Event {
            sample: e.sample / dec.factor,
            label: e.label.clone(),
        })
        .filter(|e| e.sample < samples)
        .collect();
    Recording::new(data, target, rec.channel_names.clone(), events)
}

/// Channels reordered (and reduced) to `wanted`.
pub fn select_channels(rec: &Recording, wanted: &[String]) -> Result<Recording> {
    let missing: Vec<&str> = wanted
        .iter()
        .filter(|w| !rec.channel_names.contains(w))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(Error::Data(format!("channels not in recording: {}", missing.join(", "))));
    }
    let n = rec.samples();
    let mut data = Vec::with_capacity(wanted.len() * n);
    for w in wanted {
        let idx = rec.channel_names.iter().position(|c| c == w).expect("checked");
        data.extend_from_slice(rec.channel(idx));
    }
    Ok(Recording {
        data: Tensor::new(&[wanted.len(), n], data)?,
        channel_names: wanted.to_vec(),
        ..rec.clone()
    })
}

/// One `[channels, window]` trial per event, starting `offset` samples after the cue.
pub fn epoch(rec: &Recording, window: usize, offset: usize, subject: &str) -> Result<EpochSet> {
    if window == 0 {
        return Err(Error::Config("epoch window must be positive".into()));
    }
    let (channels, n) = (rec.channels(), rec.samples());
    let mut data = Vec::with_capacity(rec.events.len() * channels * window);
    let mut labels = Vec::with_capacity(rec.events.len());
    for (i, e) in rec.events.iter().enumerate() {
        let start = e.sample + offset;
        if start + window > n {
            return Err(Error::Data(format!(
                "event {i} ({}) at sample {} leaves {} samples, window needs {window}",
                e.label,
                e.sample,
                n.saturating_sub(start)
            )));
        }
        labels.push(e.label.parse::<ClassLabel>()?);
        for c in 0..channels {
            data.extend_from_slice(&rec.channel(c)[start..start + window]);
        }
    }
    EpochSet::new(
        Tensor::new(&[labels.len(), channels, window], data)?,
        labels,
        subject,
        rec.sampling_rate,
    )
}

/// Full preprocessing chain settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub bandpass: (f64, f64),
    pub bandpass_order: usize,
    pub notch: Option<f64>,
    pub notch_q: f64,
    pub resample: f64,
    pub montage: String,
    pub window: usize,
    pub offset: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            bandpass: (1.0, 60.0),
            bandpass_order: 4,
            notch: Some(60.0),
            notch_q: 30.0,
            resample: 250.0,
            montage: "motor24".into(),
            window: 751,
            offset: 0,
        }
    }
}

/// Channel selection, notch, band-pass, decimation and epoching, in that order.
pub fn preprocess(rec: &Recording, cfg: &PreprocessConfig, subject: &str) -> Result<EpochSet> {
    let mut r = select_channels(rec, &montage(&cfg.montage)?)?;
    if let Some(f0) = cfg.notch {
        r = notch(&r, f0, cfg.notch_q)?;
    }
    r = bandpass(&r, cfg.bandpass.0, cfg.bandpass.1, cfg.bandpass_order)?;
    r = resample(&r, cfg.resample)?;
    epoch(&r, cfg.window, cfg.offset, subject)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("E{i}")).collect()
    }

    fn rec(channels: usize, samples: usize) -> Recording {
        Recording::new(
            Tensor::from_fn(&[channels, samples], |i| i as f64),
            1000.0,
            names(channels),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn select_reorders_and_reports_missing() {
        let r = rec(4, 3);
        let wanted: Vec<String> = vec!["E2".into(), "E0".into()];
        let s = select_channels(&r, &wanted).unwrap();
        assert_eq!(s.channel(0), &[6.0, 7.0, 8.0]);
        assert_eq!(s.channel(1), &[0.0, 1.0, 2.0]);
        assert_eq!(select_channels(&r, &r.channel_names).unwrap(), r);
        let err = select_channels(&r, &["XX".to_string()]).unwrap_err();
        assert!(err.to_string().contains("XX"));
    }

    #[test]
    fn epoch_slices_and_guards_the_end() {
        let mut r = rec(2, 800);
        r.events = vec![Event {
            sample: 0,
            label: "rest".into(),
        }];
        let e = epoch(&r, 751, 0, "s").unwrap();
        assert_eq!(e.epochs.shape(), &[1, 2, 751]);
        assert_eq!(&e.trial(0)[..751], &r.channel(0)[..751]);
        assert_eq!(&e.trial(0)[751..], &r.channel(1)[..751]);

        r.events.push(Event {
            sample: 100,
            label: "grasp".into(),
        });
        let err = epoch(&r, 751, 0, "s").unwrap_err();
        assert!(err.to_string().contains("event 1"), "{err}");
    }

    #[test]
    fn recording_round_trip_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.bin");
        let mut r = rec(3, 10);
        r.events.push(Event {
            sample: 4,
            label: "twist".into(),
        });
        r.write(&path).unwrap();
        assert_eq!(Recording::read(&path).unwrap(), r);
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(Recording::read(&path), Err(Error::Truncated { .. })));
    }

    #[test]
    fn events_are_rescaled_by_the_factor() {
        let mut r = rec(1, 4000);
        r.events = vec![Event {
            sample: 1003,
            label: "rest".into(),
        }];
        let d = resample(&r, 250.0).unwrap();
        assert_eq!(d.samples(), 1000);
        assert_eq!(d.events[0].sample, 250);
        assert_eq!(d.sampling_rate, 250.0);
    }

    #[test]
    fn montage_has_24_distinct_channels() {
        let m = montage("motor24").unwrap();
        assert_eq!(m.len(), 24);
        let mut s = m.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 24);
        assert!(montage("nope").is_err());
    }
}
