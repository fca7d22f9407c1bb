//! Label taxonomy, epoch containers and splits, and the synthetic generator.

mod epochs;
mod synth;
mod taxonomy;

pub use epochs::{split, EpochSet, EPOCH_FILE_VERSION};
pub use synth::{default_erd_maps, synth_generate, synth_recording, SynthConfig};
pub use taxonomy::{to_targets, Category, ClassLabel, Head, Targets, TaskId, TaskSpec, HAND_CLASSES};
