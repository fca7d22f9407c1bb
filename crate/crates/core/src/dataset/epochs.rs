use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::taxonomy::{ClassLabel, TaskSpec};
use crate::error::{Error, Result};
use crate::io;
use crate::tensor::Tensor;

pub const EPOCH_FILE_VERSION: u32 = 1;

/// Segmented, labelled trials of one subject: `epochs` is `[n, channels, samples]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochSet {
    pub epochs: Tensor<f64>,
    pub labels: Vec<ClassLabel>,
    pub subject: String,
    pub sampling_rate: f64,
}

#[derive(Serialize, Deserialize)]
struct EpochHeader {
    version: u32,
    sampling_rate: f64,
    n: usize,
    channels: usize,
    samples: usize,
    labels: Vec<String>,
    subject: String,
}

impl EpochSet {
    pub fn new(epochs: Tensor<f64>, labels: Vec<ClassLabel>, subject: impl Into<String>, sampling_rate: f64) -> Result<Self> {
        if epochs.ndim() != 3 {
            return Err(Error::Data(format!(
                "epochs must be [n, channels, samples], got {:?}",
                epochs.shape()
            )));
        }
        if epochs.shape()[0] != labels.len() {
            return Err(Error::Data(format!(
                "{} epochs but {} labels",
                epochs.shape()[0],
                labels.len()
            )));
        }
        if sampling_rate <= 0.0 {
            return Err(Error::Data("sampling rate must be positive".into()));
        }
        Ok(Self {
            epochs,
            labels,
            subject: subject.into(),
            sampling_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.epochs.shape()[1]
    }

    pub fn samples(&self) -> usize {
        self.epochs.shape()[2]
    }

    /// `(channels, samples)` trial `i` as a flat channel-major slice.
    pub fn trial(&self, i: usize) -> &[f64] {
        let len = self.channels() * self.samples();
        &self.epochs.data()[i * len..(i + 1) * len]
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Ok(Self {
            epochs: self.epochs.select_rows(indices)?,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            subject: self.subject.clone(),
            sampling_rate: self.sampling_rate,
        })
    }

    /// Trials whose labels belong to `spec`, in original order.
    pub fn restrict(&self, spec: &TaskSpec) -> Result<Self> {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| spec.contains(self.labels[i])).collect();
        self.subset(&keep)
    }

    pub fn check_task(&self, spec: &TaskSpec) -> Result<()> {
        match self.labels.iter().find(|l| !spec.contains(**l)) {
            Some(l) => Err(Error::Data(format!("label {l} is not part of task {}", spec.id))),
            None => Ok(()),
        }
    }

    /// Trial count per label in `ClassLabel::ALL` order.
    pub fn class_counts(&self) -> [usize; 9] {
        let mut counts = [0; 9];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }

    /// SHA-256 over the raw sample bytes and labels.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for v in self.epochs.data() {
            h.update(v.to_le_bytes());
        }
        for l in &self.labels {
            h.update(l.name().as_bytes());
            h.update([0]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let header = EpochHeader {
            version: EPOCH_FILE_VERSION,
            sampling_rate: self.sampling_rate,
            n: self.len(),
            channels: self.channels(),
            samples: self.samples(),
            labels: self.labels.iter().map(|l| l.name().to_string()).collect(),
            subject: self.subject.clone(),
        };
        io::write_framed(path, &header, self.epochs.data())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let (header, payload): (EpochHeader, _) = io::read_framed(path)?;
        io::check_version(path, header.version, EPOCH_FILE_VERSION)?;
        if header.labels.len() != header.n {
            return Err(Error::MalformedHeader {
                path: path.to_path_buf(),
                detail: format!("{} labels for {} epochs", header.labels.len(), header.n),
            });
        }
        let labels = header
            .labels
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<ClassLabel>>>()
            .map_err(|e| Error::MalformedHeader {
                path: path.to_path_buf(),
                detail: e.to_string(),
            })?;
        let shape = [header.n, header.channels, header.samples];
        let data = io::decode_f64(path, &payload, shape.iter().product())?;
        Self::new(Tensor::new(&shape, data)?, labels, header.subject, header.sampling_rate)
    }
}

/// Stratified train/test partition. Per class, `round(count * test_fraction)`
/// trials go to the test set; both halves keep the original trial order.
pub fn split(set: &EpochSet, test_fraction: f64, seed: u64) -> Result<(EpochSet, EpochSet)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::Config(format!("test fraction {test_fraction} outside [0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = Vec::new();
    for label in ClassLabel::ALL {
        let mut members: Vec<usize> = (0..set.len()).filter(|&i| set.labels[i] == label).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(Error::Data(format!(
                "class {label} has {} trial(s); at least 2 are needed to split",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let n_test = (members.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&members[..n_test]);
    }
    test.sort_unstable();
    let mut is_test = vec![false; set.len()];
    for &i in &test {
        is_test[i] = true;
    }
    let train: Vec<usize> = (0..set.len()).filter(|&i| !is_test[i]).collect();
    Ok((set.subset(&train)?, set.subset(&test)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn balanced(per_class: usize) -> EpochSet {
        let n = per_class * 9;
        let labels = (0..n).map(|i| ClassLabel::ALL[i % 9]).collect();
        let epochs = Tensor::from_fn(&[n, 2, 3], |i| i as f64);
        EpochSet::new(epochs, labels, "s1", 250.0).unwrap()
    }

    #[test]
    fn stratified_split_arithmetic() {
        let set = balanced(50);
        let (train, test) = split(&set, 0.2, 7).unwrap();
        assert_eq!((train.len(), test.len()), (360, 90));
        for c in test.class_counts() {
            assert_eq!(c, 10);
        }
    }

    #[test]
    fn split_is_deterministic_disjoint_and_complete() {
        let set = balanced(11);
        let (a_train, a_test) = split(&set, 0.2, 3).unwrap();
        let (b_train, b_test) = split(&set, 0.2, 3).unwrap();
        assert_eq!(a_train, b_train);
        assert_eq!(a_test, b_test);
        let mut firsts: Vec<f64> = a_train
            .epochs
            .data()
            .chunks(6)
            .chain(a_test.epochs.data().chunks(6))
            .map(|c| c[0])
            .collect();
        firsts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected: Vec<f64> = (0..set.len()).map(|i| (i * 6) as f64).collect();
        assert_eq!(firsts, expected);
        for c in a_test.class_counts() {
            // 11 * 0.2 = 2.2 rounds to 2.
            assert_eq!(c, 2);
        }
    }

    #[test]
    fn zero_fraction_gives_empty_test() {
        let (train, test) = split(&balanced(4), 0.0, 1).unwrap();
        assert_eq!(train.len(), 36);
        assert!(test.is_empty());
    }

    #[test]
    fn singleton_class_cannot_be_split() {
        let set = EpochSet::new(
            Tensor::zeros(&[3, 1, 1]),
            vec![ClassLabel::Rest, ClassLabel::Rest, ClassLabel::Grasp],
            "s",
            250.0,
        )
        .unwrap();
        assert!(matches!(split(&set, 0.2, 0), Err(Error::Data(_))));
    }

    #[test]
    fn file_errors_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.bin");
        let set = balanced(2);
        set.write(&path).unwrap();
        assert_eq!(EpochSet::read(&path).unwrap(), set);

        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(EpochSet::read(&path), Err(Error::Truncated { .. })));

        let text = String::from_utf8_lossy(&bytes[..bytes.iter().position(|&b| b == b'\n').unwrap()])
            .replace("\"version\":1", "\"version\":99");
        let mut patched = text.into_bytes();
        patched.push(b'\n');
        std::fs::write(&path, &patched).unwrap();
        assert!(matches!(EpochSet::read(&path), Err(Error::Version { found: 99, .. })));

        std::fs::write(&path, b"{\"version\":1}\n").unwrap();
        assert!(matches!(EpochSet::read(&path), Err(Error::MalformedHeader { .. })));
    }
}
