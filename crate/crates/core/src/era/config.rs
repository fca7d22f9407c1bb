use serde::{Deserialize, Serialize};

use crate::dataset::TaskSpec;
use crate::error::{Error, Result};

/// Shared-feature extent `(filters, height, width)` of the default layout.
pub const REFERENCE_SHARED_FEATURES: [usize; 3] = [36, 1, 216];

/// How the shared-layer probabilities weight the sub-network losses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbabilityWeighting {
    /// `p_a`, `p_h` are read as constants; no gradient flows through them.
    #[default]
    Detached,
    /// Gradients also flow into the shared softmax through the weights.
    Differentiable,
}

/// What a sub-network learns from samples of the other category.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffTargetTraining {
    /// Each head's loss covers only samples of its own category.
    #[default]
    Masked,
    /// Off-category samples are pushed toward a uniform head output.
    Uniform,
}

/// Layer layout of the role-assigned network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EraConfig {
    pub channels: usize,
    pub samples: usize,
    pub sampling_rate: f64,
    /// Temporal kernel length; `None` means a quarter of the sampling rate.
    pub temporal_kernel: Option<usize>,
    pub shared_width: usize,
    pub block2_kernel: usize,
    pub arm_widths: Vec<usize>,
    pub arm_kernels: Vec<usize>,
    pub hand_widths: Vec<usize>,
    pub hand_kernels: Vec<usize>,
    pub pool_window: usize,
    pub pool_stride: usize,
    pub elu_alpha: f64,
    /// Arm-head output width; zero builds the shared layer alone.
    pub arm_classes: usize,
    pub weighting: ProbabilityWeighting,
    pub off_target: OffTargetTraining,
}

impl Default for EraConfig {
    fn default() -> Self {
        Self {
            channels: 24,
            samples: 751,
            sampling_rate: 250.0,
            temporal_kernel: None,
            shared_width: 36,
            block2_kernel: 14,
            arm_widths: vec![36, 72, 144, 288],
            arm_kernels: vec![5, 5, 5, 3],
            hand_widths: vec![72, 144, 288],
            hand_kernels: vec![7, 7, 7],
            pool_window: 3,
            pool_stride: 3,
            elu_alpha: 1.0,
            arm_classes: 2,
            weighting: ProbabilityWeighting::Detached,
            off_target: OffTargetTraining::Masked,
        }
    }
}

/// Width bookkeeping for one conv-pool stack.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StackPlan {
    /// Temporal extent after each conv-pool block.
    pub widths: Vec<usize>,
    /// Kernel width of the final classifier (the remaining temporal extent).
    pub classifier_width: usize,
}

/// Symbolic shapes derived from a configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapePlan {
    pub temporal_out: usize,
    pub pooled: usize,
    /// `(filters, height, width)` of the shared features.
    pub shared_features: [usize; 3],
    pub arm: Option<StackPlan>,
    pub hand: Option<StackPlan>,
}

impl EraConfig {
    pub fn for_task(task: &TaskSpec) -> Self {
        Self {
            arm_classes: task.m(),
            ..Self::default()
        }
    }

    pub fn temporal_kernel_len(&self) -> usize {
        self.temporal_kernel
            .unwrap_or_else(|| (self.sampling_rate / 4.0).round() as usize)
    }

    pub fn has_heads(&self) -> bool {
        self.arm_classes > 0
    }

    fn conv_width(&self, block: &str, width: usize, kernel: usize) -> Result<usize> {
        if kernel == 0 || kernel > width {
            return Err(Error::Config(format!(
                "{block}: kernel width {kernel} does not fit temporal extent {width}"
            )));
        }
        Ok(width - kernel + 1)
    }

    fn pool_width(&self, block: &str, width: usize) -> Result<usize> {
        if self.pool_window == 0 || self.pool_stride == 0 || self.pool_window > width {
            return Err(Error::Config(format!(
                "{block}: pooling window {} (stride {}) does not fit temporal extent {width}",
                self.pool_window, self.pool_stride
            )));
        }
        Ok((width - self.pool_window) / self.pool_stride + 1)
    }

    fn stack_plan(&self, name: &str, input: usize, widths: &[usize], kernels: &[usize]) -> Result<StackPlan> {
        if widths.is_empty() || widths.len() != kernels.len() {
            return Err(Error::Config(format!(
                "{name} sub-network needs one kernel per block ({} widths, {} kernels)",
                widths.len(),
                kernels.len()
            )));
        }
        let mut w = input;
        let mut out = Vec::with_capacity(widths.len());
        for (i, &k) in kernels.iter().enumerate() {
            let block = format!("{name} block {}", i + 1);
            w = self.conv_width(&block, w, k)?;
            w = self.pool_width(&block, w)?;
            out.push(w);
        }
        Ok(StackPlan {
            widths: out,
            classifier_width: w,
        })
    }

    /// Derives every temporal extent, failing on the first block that
    /// collapses to a non-positive size.
    pub fn shape_plan(&self) -> Result<ShapePlan> {
        if self.channels == 0 || self.samples == 0 || self.shared_width == 0 {
            return Err(Error::Config("input and shared widths must be positive".into()));
        }
        if !(self.elu_alpha > 0.0) {
            return Err(Error::Config("ELU alpha must be positive".into()));
        }
        let temporal_out = self.conv_width("shared temporal convolution", self.samples, self.temporal_kernel_len())?;
        let pooled = self.pool_width("shared pooling", temporal_out)?;
        let features = self.conv_width("shared block 2", pooled, self.block2_kernel)?;
        let (arm, hand) = if self.has_heads() {
            if self.arm_classes < 2 {
                return Err(Error::Config("the arm sub-network needs at least two classes".into()));
            }
            let arm_max = self.arm_kernels.iter().max().copied().unwrap_or(0);
            let hand_min = self.hand_kernels.iter().min().copied().unwrap_or(0);
            if arm_max >= hand_min {
                return Err(Error::Config(format!(
                    "arm kernels (max {arm_max}) must be strictly smaller than hand kernels (min {hand_min})"
                )));
            }
            (
                Some(self.stack_plan("arm", features, &self.arm_widths, &self.arm_kernels)?),
                Some(self.stack_plan("hand", features, &self.hand_widths, &self.hand_kernels)?),
            )
        } else {
            (None, None)
        };
        Ok(ShapePlan {
            temporal_out,
            pooled,
            shared_features: [self.shared_width, 1, features],
            arm,
            hand,
        })
    }
}
