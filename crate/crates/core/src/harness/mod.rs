//! Training loop, evaluation, statistics and report generation.

mod eval;
mod experiment;
mod psd;
mod stats;
mod train;

pub use eval::{evaluate, evaluate_set, truth_indices, Evaluation};
pub use experiment::{
    fit_method, run_experiment, EvalReport, ExperimentSpec, Fitted, Method, MethodConfig, PairedComparison, SubjectRow,
};
pub use psd::{class_psd, psd_report, PsdTable, MU_BAND, PLOT_MAX_HZ};
pub use stats::{mean, paired_ttest, std_dev, t_two_tailed, TTest};
pub use train::{batch_layout, network_input, train, EpochRecord, Network, Predictor, TaskFbcsp, TrainConfig};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::EpochSet;

/// Copy of `set` with its labels randomly permuted.
pub fn shuffle_labels(set: &EpochSet, seed: u64) -> EpochSet {
    let mut out = set.clone();
    out.labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    out
}
