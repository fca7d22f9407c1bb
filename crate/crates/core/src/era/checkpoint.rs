use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::EraConfig;
use super::model::{EraModel, FlatModel, ParamSet};
use crate::dataset::TaskSpec;
use crate::error::{Error, Result};
use crate::io;
use crate::tensor::{Precision, Real, Tensor};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Era,
    Flat,
    Fbcsp,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Era => "era",
            Self::Flat => "flat",
            Self::Fbcsp => "fbcsp",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

/// Header of a checkpoint file. Tensor values follow in `tensors` order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub kind: ModelKind,
    #[serde(default)]
    pub precision: Precision,
    pub config: serde_json::Value,
    pub task: TaskSpec,
    pub seed: u64,
    pub epoch: usize,
    pub metrics: BTreeMap<String, f64>,
    pub tensors: Vec<TensorEntry>,
}

/// A manifest plus its named tensors, held in `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub manifest: Manifest,
    pub params: ParamSet<f64>,
}

impl Checkpoint {
    pub fn new<C: Serialize>(kind: ModelKind, config: &C, task: TaskSpec, seed: u64, params: ParamSet<f64>) -> Result<Self> {
        let config = serde_json::to_value(config).map_err(|e| Error::Config(e.to_string()))?;
        let tensors = params
            .names()
            .iter()
            .zip(params.tensors())
            .map(|(n, t)| TensorEntry {
                name: n.clone(),
                shape: t.shape().to_vec(),
            })
            .collect();
        Ok(Self {
            manifest: Manifest {
                version: CHECKPOINT_VERSION,
                kind,
                precision: Precision::F64,
                config,
                task,
                seed,
                epoch: 0,
                metrics: BTreeMap::new(),
                tensors,
            },
            params,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let payload: Vec<f64> = self.params.tensors().iter().flat_map(|t| t.data().iter().copied()).collect();
        io::write_framed(path, &self.manifest, &payload)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let (manifest, payload): (Manifest, _) = io::read_framed(path)?;
        io::check_version(path, manifest.version, CHECKPOINT_VERSION)?;
        let total: usize = manifest.tensors.iter().map(|e| e.shape.iter().product::<usize>()).sum();
        let values = io::decode_f64(path, &payload, total)?;
        let mut offset = 0;
        let mut names = Vec::with_capacity(manifest.tensors.len());
        let mut tensors = Vec::with_capacity(manifest.tensors.len());
        for e in &manifest.tensors {
            let len: usize = e.shape.iter().product();
            tensors.push(Tensor::new(&e.shape, values[offset..offset + len].to_vec())?);
            names.push(e.name.clone());
            offset += len;
        }
        Ok(Self {
            params: ParamSet::from_parts(names, tensors)?,
            manifest,
        })
    }

    fn expect_kind(&self, kind: ModelKind) -> Result<()> {
        if self.manifest.kind != kind {
            return Err(Error::Data(format!(
                "checkpoint holds a {} model, expected {}",
                self.manifest.kind.name(),
                kind.name()
            )));
        }
        Ok(())
    }

    pub fn config<C: serde::de::DeserializeOwned>(&self) -> Result<C> {
        serde_json::from_value(self.manifest.config.clone()).map_err(|e| Error::Data(format!("checkpoint configuration: {e}")))
    }

    pub fn era_model<T: Real>(&self) -> Result<EraModel<T>> {
        self.expect_kind(ModelKind::Era)?;
        let config: EraConfig = self.config()?;
        let mut model = EraModel::new(config, self.manifest.task.clone(), self.manifest.seed)?;
        model.params_mut().load(&self.params.cast())?;
        Ok(model)
    }

    pub fn flat_model<T: Real>(&self) -> Result<FlatModel<T>> {
        self.expect_kind(ModelKind::Flat)?;
        let config: EraConfig = self.config()?;
        let mut model = FlatModel::new(config, self.manifest.task.clone(), self.manifest.seed)?;
        model.params_mut().load(&self.params.cast())?;
        Ok(model)
    }
}

pub fn precision_of<T: Real>() -> Precision {
    if std::mem::size_of::<T>() == 4 {
        Precision::F32
    } else {
        Precision::F64
    }
}

impl<T: Real> EraModel<T> {
    pub fn checkpoint(&self, seed: u64) -> Result<Checkpoint> {
        let mut ck = Checkpoint::new(ModelKind::Era, self.config(), self.task().clone(), seed, self.params().cast())?;
        ck.manifest.precision = precision_of::<T>();
        Ok(ck)
    }
}

impl<T: Real> FlatModel<T> {
    pub fn checkpoint(&self, seed: u64) -> Result<Checkpoint> {
        let mut ck = Checkpoint::new(ModelKind::Flat, self.config(), self.task().clone(), seed, self.params().cast())?;
        ck.manifest.precision = precision_of::<T>();
        Ok(ck)
    }
}
