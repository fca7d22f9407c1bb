use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassLabel, EpochSet, TaskSpec};
use crate::era::{batch_targets, Checkpoint, EraModel, FlatModel, LossParts, ParamSet};
use crate::error::{Error, Result};
use crate::fbcsp::FbcspModel;
use crate::tensor::{Adam, AdamConfig, Graph, Precision, Real, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub precision: Precision,
    /// Write a checkpoint every this many epochs; zero disables.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            epochs: 200,
            seed: 0,
            adam: AdamConfig::default(),
            precision: Precision::F32,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch size and epoch count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Number of mini-batches per epoch and the size of the last one.
pub fn batch_layout(trials: usize, batch_size: usize) -> (usize, usize) {
    let batches = trials.div_ceil(batch_size);
    let last = if trials % batch_size == 0 { batch_size.min(trials) } else { trials % batch_size };
    (batches, last)
}

/// Mean loss terms over one epoch, weighted by batch size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub steps: usize,
    pub total: f64,
    pub shared: f64,
    pub arm: f64,
    pub hand: f64,
}

/// A trainable network over epochs `[N, 1, channels, samples]`.
pub trait Network<T: Real> {
    fn task(&self) -> &TaskSpec;
    fn params(&self) -> &ParamSet<T>;
    fn params_mut(&mut self) -> &mut ParamSet<T>;
    fn batch_loss(&self, g: &mut Graph<T>, vars: &[Var], x: &Tensor<T>, labels: &[ClassLabel]) -> Result<(Var, LossParts)>;
    fn predict_batch(&self, x: &Tensor<T>) -> Result<Vec<usize>>;
}

impl<T: Real> Network<T> for EraModel<T> {
    fn task(&self) -> &TaskSpec {
        EraModel::task(self)
    }
    fn params(&self) -> &ParamSet<T> {
        EraModel::params(self)
    }
    fn params_mut(&mut self) -> &mut ParamSet<T> {
        EraModel::params_mut(self)
    }
    fn batch_loss(&self, g: &mut Graph<T>, vars: &[Var], x: &Tensor<T>, labels: &[ClassLabel]) -> Result<(Var, LossParts)> {
        let targets = batch_targets(labels, EraModel::task(self))?;
        self.composite_loss(g, vars, x, &targets)
    }
    fn predict_batch(&self, x: &Tensor<T>) -> Result<Vec<usize>> {
        self.predict(x)
    }
}

impl<T: Real> Network<T> for FlatModel<T> {
    fn task(&self) -> &TaskSpec {
        FlatModel::task(self)
    }
    fn params(&self) -> &ParamSet<T> {
        FlatModel::params(self)
    }
    fn params_mut(&mut self) -> &mut ParamSet<T> {
        FlatModel::params_mut(self)
    }
    fn batch_loss(&self, g: &mut Graph<T>, vars: &[Var], x: &Tensor<T>, labels: &[ClassLabel]) -> Result<(Var, LossParts)> {
        let task = FlatModel::task(self);
        let idx = labels.iter().map(|&l| task.class_index(l)).collect::<Result<Vec<_>>>()?;
        self.loss(g, vars, x, &idx)
    }
    fn predict_batch(&self, x: &Tensor<T>) -> Result<Vec<usize>> {
        self.predict(x)
    }
}

/// Epochs reshaped to network input `[N, 1, channels, samples]`.
pub fn network_input<T: Real>(set: &EpochSet) -> Result<Tensor<T>> {
    set.epochs.cast::<T>().reshape(&[set.len(), 1, set.channels(), set.samples()])
}

/// Mini-batch Adam training with per-epoch seeded shuffling. `after_epoch`
/// runs after every epoch with the record and the updated network.
pub fn train<T, N>(
    net: &mut N,
    set: &EpochSet,
    cfg: &TrainConfig,
    mut after_epoch: impl FnMut(&EpochRecord, &N) -> Result<()>,
) -> Result<Vec<EpochRecord>>
where
    T: Real,
    N: Network<T>,
{
    cfg.validate()?;
    if set.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    set.check_task(net.task())?;
    let x = network_input::<T>(set)?;
    let mut adam = Adam::new(cfg.adam, net.params().tensors());
    let mut order: Vec<usize> = (0..set.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut rec = EpochRecord {
            epoch: epoch + 1,
            steps: 0,
            total: 0.0,
            shared: 0.0,
            arm: 0.0,
            hand: 0.0,
        };
        for idx in order.chunks(cfg.batch_size) {
            let xb = x.select_rows(idx)?;
            let labels: Vec<ClassLabel> = idx.iter().map(|&i| set.labels[i]).collect();
            let mut g = Graph::new();
            let vars = net.params().register(&mut g);
            let (loss, parts) = net.batch_loss(&mut g, &vars, &xb, &labels)?;
            let mut grads = g.backward(loss)?;
            let grads: Vec<Tensor<T>> = vars.iter().map(|&v| grads.take(v)).collect();
            drop(g);
            adam.step(&mut net.params_mut().tensors_mut(), &grads)?;
            let w = idx.len() as f64 / set.len() as f64;
            rec.steps += 1;
            rec.total += w * parts.total;
            rec.shared += w * parts.shared;
            rec.arm += w * parts.arm;
            rec.hand += w * parts.hand;
        }
        after_epoch(&rec, net)?;
        history.push(rec);
    }
    Ok(history)
}

/// A fitted classifier producing task class indices.
pub trait Predictor {
    fn predict_set(&self, set: &EpochSet) -> Result<Vec<usize>>;
    fn checkpoint(&self, seed: u64) -> Result<Checkpoint>;
}

impl<T: Real> Predictor for EraModel<T> {
    fn predict_set(&self, set: &EpochSet) -> Result<Vec<usize>> {
        self.predict(&network_input(set)?)
    }
    fn checkpoint(&self, seed: u64) -> Result<Checkpoint> {
        EraModel::checkpoint(self, seed)
    }
}

impl<T: Real> Predictor for FlatModel<T> {
    fn predict_set(&self, set: &EpochSet) -> Result<Vec<usize>> {
        self.predict(&network_input(set)?)
    }
    fn checkpoint(&self, seed: u64) -> Result<Checkpoint> {
        FlatModel::checkpoint(self, seed)
    }
}

/// FBCSP model bound to the task whose class indices it predicts.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskFbcsp {
    pub task: TaskSpec,
    pub model: FbcspModel,
}

impl Predictor for TaskFbcsp {
    fn predict_set(&self, set: &EpochSet) -> Result<Vec<usize>> {
        self.model.predict(&set.epochs)
    }
    fn checkpoint(&self, seed: u64) -> Result<Checkpoint> {
        self.model.checkpoint(self.task.clone(), seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batching_arithmetic() {
        let (batches, last) = batch_layout(360, 32);
        assert_eq!((batches, last), (12, 8));
        assert_eq!(batches * 200, 2400);
        assert_eq!(batch_layout(64, 32), (2, 32));
        assert_eq!(batch_layout(5, 32), (1, 5));
    }
}
