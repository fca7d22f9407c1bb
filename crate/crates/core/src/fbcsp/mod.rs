//! Filter-bank common spatial patterns with a shrinkage LDA classifier.

mod csp;
mod rlda;

pub use csp::{
    class_covariance, csp_fit, csp_from_covariances, generalized_eigen, log_variance, trial_covariance, CspFilters,
    COVARIANCE_SHRINKAGE,
};
pub use rlda::{ledoit_wolf, rlda_fit, rlda_predict, RldaModel, Shrinkage};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::TaskSpec;
use crate::era::{argmax, Checkpoint, ModelKind, ParamSet};
use crate::error::{Error, Result};
use crate::sigproc::butter_bandpass;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FbcspConfig {
    /// Pass bands in Hz.
    pub bands: Vec<(f64, f64)>,
    pub n_pairs: usize,
    /// Low-pass prototype order of each band filter.
    pub filter_order: usize,
    pub shrinkage: Shrinkage,
}

impl Default for FbcspConfig {
    fn default() -> Self {
        Self {
            bands: (0..9).map(|i| (4.0 + 4.0 * i as f64, 8.0 + 4.0 * i as f64)).collect(),
            n_pairs: 2,
            filter_order: 4,
            shrinkage: Shrinkage::Auto,
        }
    }
}

impl FbcspConfig {
    pub fn feature_len(&self) -> usize {
        self.bands.len() * 2 * self.n_pairs
    }
}

/// Layout stored alongside the configuration in a checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct StoredLayout {
    config: FbcspConfig,
    classes: usize,
    channels: usize,
    sampling_rate: f64,
}

/// One two-class CSP split: filters per band and its discriminant.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub filters: Vec<CspFilters>,
    pub rlda: RldaModel,
}

/// Fitted FBCSP+RLDA classifier. Two classes use one split; more classes
/// use one-vs-rest splits and the highest discriminant margin wins.
#[derive(Clone, Debug, PartialEq)]
pub struct FbcspModel {
    pub config: FbcspConfig,
    pub classes: usize,
    pub channels: usize,
    pub sampling_rate: f64,
    pub splits: Vec<Split>,
}

fn dims(epochs: &Tensor<f64>) -> Result<(usize, usize, usize)> {
    match *epochs.shape() {
        [n, c, s] => Ok((n, c, s)),
        _ => Err(Error::shape("fbcsp", format!("expected [trials, channels, samples], got {:?}", epochs.shape()))),
    }
}

/// Band-filtered copies of every trial, one buffer per band.
fn filter_bank(epochs: &Tensor<f64>, config: &FbcspConfig, fs: f64) -> Result<Vec<Vec<f64>>> {
    let (_, _, samples) = dims(epochs)?;
    config
        .bands
        .iter()
        .map(|&(lo, hi)| {
            let sos = butter_bandpass(lo, hi, config.filter_order, fs)?;
            let mut out = Vec::with_capacity(epochs.len());
            for row in epochs.data().chunks(samples) {
                out.extend(sos.filtfilt(row));
            }
            Ok(out)
        })
        .collect()
}

fn trial(buf: &[f64], i: usize, size: usize) -> &[f64] {
    &buf[i * size..(i + 1) * size]
}

impl Split {
    fn features(&self, banked: &[Vec<f64>], i: usize, channels: usize, size: usize) -> Vec<f64> {
        self.filters
            .iter()
            .zip(banked)
            .flat_map(|(f, buf)| log_variance(trial(buf, i, size), channels, &f.filters))
            .collect()
    }
}

impl FbcspModel {
    /// Fits on `epochs` `[trials, channels, samples]` with class indices `labels`.
    pub fn fit(epochs: &Tensor<f64>, labels: &[usize], sampling_rate: f64, config: FbcspConfig) -> Result<Self> {
        let (n, channels, samples) = dims(epochs)?;
        if labels.len() != n {
            return Err(Error::Data(format!("{} labels for {n} trials", labels.len())));
        }
        let classes = labels.iter().max().map_or(0, |m| m + 1);
        if classes < 2 {
            return Err(Error::Data("FBCSP needs at least two classes".into()));
        }
        let banked = filter_bank(epochs, &config, sampling_rate)?;
        let size = channels * samples;
        let groups: Vec<(Vec<usize>, Vec<usize>)> = if classes == 2 {
            vec![(
                (0..n).filter(|&i| labels[i] == 0).collect(),
                (0..n).filter(|&i| labels[i] == 1).collect(),
            )]
        } else {
            (0..classes)
                .map(|k| {
                    (
                        (0..n).filter(|&i| labels[i] == k).collect(),
                        (0..n).filter(|&i| labels[i] != k).collect(),
                    )
                })
                .collect()
        };
        let mut splits = Vec::with_capacity(groups.len());
        for (a, b) in &groups {
            let filters = banked
                .iter()
                .map(|buf| {
                    csp_fit(
                        a.iter().map(|&i| trial(buf, i, size)),
                        b.iter().map(|&i| trial(buf, i, size)),
                        channels,
                        config.n_pairs,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let mut split = Split {
                filters,
                rlda: RldaModel {
                    means: DMatrix::zeros(0, 0),
                    inv_cov: DMatrix::zeros(0, 0),
                    lambda: 0.0,
                    log_priors: Vec::new(),
                },
            };
            let feats: Vec<Vec<f64>> = (0..n).map(|i| split.features(&banked, i, channels, size)).collect();
            // Class a is always index 0 of a split's discriminant.
            let bin: Vec<usize> = (0..n).map(|i| usize::from(!a.contains(&i))).collect();
            split.rlda = rlda_fit(&feats, &bin, config.shrinkage)?;
            splits.push(split);
        }
        Ok(Self {
            config,
            classes,
            channels,
            sampling_rate,
            splits,
        })
    }

    /// Feature vectors of every trial for split `s`.
    pub fn features(&self, epochs: &Tensor<f64>, s: usize) -> Result<Vec<Vec<f64>>> {
        let (n, channels, samples) = self.check(epochs)?;
        let split = self.splits.get(s).ok_or_else(|| Error::Config(format!("no split {s}")))?;
        let banked = filter_bank(epochs, &self.config, self.sampling_rate)?;
        Ok((0..n).map(|i| split.features(&banked, i, channels, channels * samples)).collect())
    }

    fn check(&self, epochs: &Tensor<f64>) -> Result<(usize, usize, usize)> {
        let d = dims(epochs)?;
        if d.1 != self.channels {
            return Err(Error::shape("fbcsp", format!("model fitted on {} channels, got {}", self.channels, d.1)));
        }
        Ok(d)
    }

    pub fn predict(&self, epochs: &Tensor<f64>) -> Result<Vec<usize>> {
        let (n, channels, samples) = self.check(epochs)?;
        let banked = filter_bank(epochs, &self.config, self.sampling_rate)?;
        let size = channels * samples;
        Ok((0..n)
            .map(|i| {
                let margins: Vec<f64> = self
                    .splits
                    .iter()
                    .map(|s| {
                        let sc = s.rlda.scores(&s.features(&banked, i, channels, size));
                        sc[0] - sc[1]
                    })
                    .collect();
                if self.classes == 2 {
                    usize::from(margins[0] < 0.0)
                } else {
                    argmax(&margins)
                }
            })
            .collect())
    }

    pub fn checkpoint(&self, task: TaskSpec, seed: u64) -> Result<Checkpoint> {
        let layout = StoredLayout {
            config: self.config.clone(),
            classes: self.classes,
            channels: self.channels,
            sampling_rate: self.sampling_rate,
        };
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        let mut put = |name: String, m: &DMatrix<f64>| {
            names.push(name);
            tensors.push(Tensor::from_fn(&[m.nrows(), m.ncols()], |i| m[(i / m.ncols(), i % m.ncols())]));
        };
        for (s, split) in self.splits.iter().enumerate() {
            for (b, f) in split.filters.iter().enumerate() {
                put(format!("split{s}.band{b}.filters"), &f.filters);
                put(format!("split{s}.band{b}.eigenvalues"), &DMatrix::from_row_slice(1, f.eigenvalues.len(), &f.eigenvalues));
            }
            let r = &split.rlda;
            put(format!("split{s}.means"), &r.means);
            put(format!("split{s}.inv_cov"), &r.inv_cov);
            put(format!("split{s}.log_priors"), &DMatrix::from_row_slice(1, r.log_priors.len(), &r.log_priors));
            put(format!("split{s}.lambda"), &DMatrix::from_element(1, 1, r.lambda));
        }
        Checkpoint::new(ModelKind::Fbcsp, &layout, task, seed, ParamSet::from_parts(names, tensors)?)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.manifest.kind != ModelKind::Fbcsp {
            return Err(Error::Data(format!("checkpoint holds a {} model, expected fbcsp", ck.manifest.kind.name())));
        }
        let layout: StoredLayout = ck.config()?;
        let get = |name: String| -> Result<DMatrix<f64>> {
            let t = ck
                .params
                .get(&name)
                .ok_or_else(|| Error::Data(format!("checkpoint lacks tensor {name}")))?;
            let [r, c] = t.shape() else {
                return Err(Error::Data(format!("tensor {name} is not a matrix")));
            };
            Ok(DMatrix::from_row_slice(*r, *c, t.data()))
        };
        let n_splits = if layout.classes == 2 { 1 } else { layout.classes };
        let mut splits = Vec::with_capacity(n_splits);
        for s in 0..n_splits {
            let filters = (0..layout.config.bands.len())
                .map(|b| {
                    let filters = get(format!("split{s}.band{b}.filters"))?;
                    if filters.shape() != (layout.channels, 2 * layout.config.n_pairs) {
                        return Err(Error::Data(format!("split{s}.band{b}.filters has shape {:?}", filters.shape())));
                    }
                    Ok(CspFilters {
                        filters,
                        eigenvalues: get(format!("split{s}.band{b}.eigenvalues"))?.iter().copied().collect(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let rlda = RldaModel {
                means: get(format!("split{s}.means"))?,
                inv_cov: get(format!("split{s}.inv_cov"))?,
                log_priors: get(format!("split{s}.log_priors"))?.iter().copied().collect(),
                lambda: get(format!("split{s}.lambda"))?[(0, 0)],
            };
            splits.push(Split { filters, rlda });
        }
        Ok(Self {
            config: layout.config,
            classes: layout.classes,
            channels: layout.channels,
            sampling_rate: layout.sampling_rate,
            splits,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::TaskId;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Trials whose class-`k` channel `k` carries extra 10 Hz power.
    fn toy(n_per: usize, classes: usize, seed: u64) -> (Tensor<f64>, Vec<usize>) {
        let (ch, s) = (4, 250);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n_per * classes {
            let k = i % classes;
            let phase = rng.gen::<f64>() * 6.28;
            for c in 0..ch {
                for t in 0..s {
                    let mut v: f64 = rng.sample(StandardNormal);
                    if c == k {
                        v += 3.0 * (2.0 * std::f64::consts::PI * 10.0 * t as f64 / 250.0 + phase).sin();
                    }
                    data.push(v);
                }
            }
            labels.push(k);
        }
        (Tensor::new(&[n_per * classes, ch, s], data).unwrap(), labels)
    }

    #[test]
    fn feature_dimension() {
        assert_eq!(FbcspConfig::default().feature_len(), 36);
    }

    #[test]
    fn multiclass_fit_and_persist() {
        let (x, y) = toy(12, 3, 1);
        let cfg = FbcspConfig {
            bands: vec![(8.0, 12.0), (20.0, 24.0)],
            n_pairs: 1,
            ..FbcspConfig::default()
        };
        let model = FbcspModel::fit(&x, &y, 250.0, cfg).unwrap();
        assert_eq!(model.splits.len(), 3);
        let pred = model.predict(&x).unwrap();
        let acc = pred.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64;
        assert!(acc > 0.9, "{acc}");

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.ckpt");
        model.checkpoint(TaskSpec::new(TaskId::ThreeClass), 0).unwrap().write(&path).unwrap();
        let back = FbcspModel::from_checkpoint(&Checkpoint::read(&path).unwrap()).unwrap();
        assert_eq!(back, model);
    }
}
