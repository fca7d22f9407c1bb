//! Role-assigned hierarchical network: a shared layer that separates arm,
//! hand and rest, feeding an arm sub-network and a hand sub-network.

mod checkpoint;
mod config;
mod loss;
mod model;

pub use checkpoint::{precision_of, Checkpoint, Manifest, ModelKind, TensorEntry, CHECKPOINT_VERSION};
pub use config::{EraConfig, OffTargetTraining, ProbabilityWeighting, ShapePlan, StackPlan, REFERENCE_SHARED_FEATURES};
pub use loss::{batch_targets, LossParts, SampleTerms};
pub use model::{argmax, ConvLayer, EraModel, FlatModel, ParamSet, SharedOutput, INFERENCE_CHUNK};
