use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{EraConfig, ShapePlan};
use crate::dataset::{Category, Head, TaskSpec};
use crate::error::{Error, Result};
use crate::tensor::{Graph, Real, Tensor, Var};

/// Rows evaluated per forward pass during inference.
pub const INFERENCE_CHUNK: usize = 32;

/// Named, ordered parameter tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet<T: Real> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
}

impl<T: Real> Default for ParamSet<T> {
    fn default() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }
}

impl<T: Real> ParamSet<T> {
    fn push(&mut self, name: String, t: Tensor<T>) -> usize {
        self.names.push(name);
        self.tensors.push(t);
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.tensors.iter_mut().collect()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Count of parameters whose name starts with `prefix`.
    pub fn count_prefix(&self, prefix: &str) -> usize {
        self.names
            .iter()
            .zip(&self.tensors)
            .filter(|(n, _)| n.starts_with(prefix))
            .map(|(_, t)| t.len())
            .sum()
    }

    /// Registers every tensor as a trainable leaf.
    pub fn register(&self, g: &mut Graph<T>) -> Vec<Var> {
        self.tensors.iter().map(|t| g.param(t.clone())).collect()
    }

    /// Registers every tensor as a constant leaf.
    pub fn register_frozen(&self, g: &mut Graph<T>) -> Vec<Var> {
        self.tensors.iter().map(|t| g.input(t.clone())).collect()
    }

    pub fn cast<U: Real>(&self) -> ParamSet<U> {
        ParamSet {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
        }
    }

    /// Replaces all values, requiring identical names and shapes.
    pub fn load(&mut self, other: &ParamSet<T>) -> Result<()> {
        if self.names != other.names {
            return Err(Error::Data(format!(
                "parameter layout mismatch: expected {:?}, found {:?}",
                self.names, other.names
            )));
        }
        for ((name, dst), src) in self.names.iter().zip(&mut self.tensors).zip(&other.tensors) {
            if dst.shape() != src.shape() {
                return Err(Error::Data(format!(
                    "parameter {name}: expected shape {:?}, found {:?}",
                    dst.shape(),
                    src.shape()
                )));
            }
            dst.clone_from(src);
        }
        Ok(())
    }

    pub fn from_parts(names: Vec<String>, tensors: Vec<Tensor<T>>) -> Result<Self> {
        if names.len() != tensors.len() {
            return Err(Error::Data(format!("{} names for {} tensors", names.len(), tensors.len())));
        }
        Ok(Self { names, tensors })
    }
}

/// Indices of a convolution's kernel and bias inside a [`ParamSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvLayer {
    pub weight: usize,
    pub bias: usize,
}

impl ConvLayer {
    fn build<T: Real>(params: &mut ParamSet<T>, rng: &mut ChaCha8Rng, name: &str, shape: [usize; 4]) -> Self {
        let [f, c, kh, kw] = shape;
        let fan_in = c * kh * kw;
        let fan_out = f * kh * kw;
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weight = Tensor::from_fn(&shape, |_| T::lit(rng.gen_range(-limit..=limit)));
        Self {
            weight: params.push(format!("{name}.weight"), weight),
            bias: params.push(format!("{name}.bias"), Tensor::zeros(&[f])),
        }
    }

    fn apply<T: Real>(&self, g: &mut Graph<T>, vars: &[Var], x: Var) -> Result<Var> {
        g.conv2d(x, vars[self.weight], vars[self.bias])
    }
}

/// Temporal convolution, spatial convolution, pooling and a second
/// temporal block, all shared by every output head.
#[derive(Clone, Debug, PartialEq)]
pub struct Trunk {
    pub temporal: ConvLayer,
    pub spatial: ConvLayer,
    pub block2: ConvLayer,
}

impl Trunk {
    fn build<T: Real>(cfg: &EraConfig, params: &mut ParamSet<T>, rng: &mut ChaCha8Rng, prefix: &str) -> Self {
        let f = cfg.shared_width;
        Self {
            temporal: ConvLayer::build(params, rng, &format!("{prefix}.temporal"), [f, 1, 1, cfg.temporal_kernel_len()]),
            spatial: ConvLayer::build(params, rng, &format!("{prefix}.spatial"), [f, f, cfg.channels, 1]),
            block2: ConvLayer::build(params, rng, &format!("{prefix}.block2"), [f, f, 1, cfg.block2_kernel]),
        }
    }

    fn forward<T: Real>(&self, cfg: &EraConfig, g: &mut Graph<T>, vars: &[Var], x: Var) -> Result<Var> {
        let pool = (1, cfg.pool_window);
        let stride = (1, cfg.pool_stride);
        let t = self.temporal.apply(g, vars, x)?;
        let s = self.spatial.apply(g, vars, t)?;
        let s = g.elu(s, cfg.elu_alpha)?;
        let p = g.avg_pool2d(s, pool, stride)?;
        let b = self.block2.apply(g, vars, p)?;
        g.elu(b, cfg.elu_alpha)
    }
}

/// Conv-ELU-pool blocks followed by a classifier spanning the remaining extent.
#[derive(Clone, Debug, PartialEq)]
pub struct Stack {
    pub blocks: Vec<ConvLayer>,
    pub classifier: ConvLayer,
    pub outputs: usize,
}

impl Stack {
    #[allow(clippy::too_many_arguments)]
    fn build<T: Real>(
        params: &mut ParamSet<T>,
        rng: &mut ChaCha8Rng,
        prefix: &str,
        input_width: usize,
        widths: &[usize],
        kernels: &[usize],
        classifier_width: usize,
        outputs: usize,
    ) -> Self {
        let mut cin = input_width;
        let blocks = widths
            .iter()
            .zip(kernels)
            .enumerate()
            .map(|(i, (&f, &k))| {
                let layer = ConvLayer::build(params, rng, &format!("{prefix}.block{}", i + 1), [f, cin, 1, k]);
                cin = f;
                layer
            })
            .collect();
        let classifier = ConvLayer::build(params, rng, &format!("{prefix}.classifier"), [outputs, cin, 1, classifier_width]);
        Self {
            blocks,
            classifier,
            outputs,
        }
    }

    fn forward<T: Real>(&self, cfg: &EraConfig, g: &mut Graph<T>, vars: &[Var], x: Var) -> Result<Var> {
        let mut h = x;
        for b in &self.blocks {
            h = b.apply(g, vars, h)?;
            h = g.elu(h, cfg.elu_alpha)?;
            h = g.avg_pool2d(h, (1, cfg.pool_window), (1, cfg.pool_stride))?;
        }
        let logits = self.classifier.apply(g, vars, h)?;
        let n = g.value(logits).shape()[0];
        let logits = g.reshape(logits, &[n, self.outputs])?;
        g.softmax(logits)
    }
}

fn check_input<T: Real>(cfg: &EraConfig, x: &Tensor<T>) -> Result<()> {
    let expect = [cfg.channels, cfg.samples];
    if x.ndim() != 4 || x.shape()[1] != 1 || x.shape()[2..] != expect {
        return Err(Error::shape(
            "model input",
            format!("expected [N, 1, {}, {}], got {:?}", cfg.channels, cfg.samples, x.shape()),
        ));
    }
    Ok(())
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax<T: Real>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

fn argmax_rows<T: Real>(probs: &Tensor<T>) -> Vec<usize> {
    let k = probs.shape()[1];
    probs.data().chunks(k).map(argmax).collect()
}

fn chunked<T: Real>(x: &Tensor<T>, mut f: impl FnMut(&Tensor<T>) -> Result<()>) -> Result<()> {
    let n = x.shape()[0];
    let mut start = 0;
    while start < n {
        let end = (start + INFERENCE_CHUNK).min(n);
        let idx: Vec<usize> = (start..end).collect();
        f(&x.select_rows(&idx)?)?;
        start = end;
    }
    Ok(())
}

/// Shared layer plus arm and hand sub-networks.
#[derive(Clone, Debug, PartialEq)]
pub struct EraModel<T: Real = f32> {
    config: EraConfig,
    task: TaskSpec,
    plan: ShapePlan,
    params: ParamSet<T>,
    trunk: Trunk,
    category: ConvLayer,
    arm: Option<Stack>,
    hand: Option<Stack>,
}

/// Shared-layer outputs of one forward pass.
#[derive(Clone, Copy, Debug)]
pub struct SharedOutput {
    /// Category probabilities `[N, 3]` in arm, hand, rest order.
    pub probs: Var,
    /// Shared feature maps `[N, F, 1, W]`.
    pub features: Var,
}

impl<T: Real> EraModel<T> {
    pub fn new(config: EraConfig, task: TaskSpec, seed: u64) -> Result<Self> {
        if config.arm_classes != task.m() {
            return Err(Error::Config(format!(
                "configuration has {} arm classes but task {} has {}",
                config.arm_classes,
                task.id,
                task.m()
            )));
        }
        let plan = config.shape_plan()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::default();
        let trunk = Trunk::build(&config, &mut params, &mut rng, "shared");
        let [f, _, w] = plan.shared_features;
        let category = ConvLayer::build(&mut params, &mut rng, "shared.classifier", [3, f, 1, w]);
        let arm = plan.arm.as_ref().map(|p| {
            Stack::build(&mut params, &mut rng, "arm", f, &config.arm_widths, &config.arm_kernels, p.classifier_width, config.arm_classes)
        });
        let hand = plan.hand.as_ref().map(|p| {
            Stack::build(&mut params, &mut rng, "hand", f, &config.hand_widths, &config.hand_kernels, p.classifier_width, 2)
        });
        Ok(Self {
            config,
            task,
            plan,
            params,
            trunk,
            category,
            arm,
            hand,
        })
    }

    pub fn config(&self) -> &EraConfig {
        &self.config
    }

    pub fn task(&self) -> &TaskSpec {
        &self.task
    }

    pub fn plan(&self) -> &ShapePlan {
        &self.plan
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    pub fn has_heads(&self) -> bool {
        self.arm.is_some()
    }

    /// Converts the parameters to another precision.
    pub fn cast<U: Real>(&self) -> EraModel<U> {
        EraModel {
            config: self.config.clone(),
            task: self.task.clone(),
            plan: self.plan.clone(),
            params: self.params.cast(),
            trunk: self.trunk.clone(),
            category: self.category,
            arm: self.arm.clone(),
            hand: self.hand.clone(),
        }
    }

    pub fn forward_shared(&self, g: &mut Graph<T>, vars: &[Var], x: Var) -> Result<SharedOutput> {
        check_input(&self.config, g.value(x))?;
        let features = self.trunk.forward(&self.config, g, vars, x)?;
        let logits = self.category.apply(g, vars, features)?;
        let n = g.value(logits).shape()[0];
        let logits = g.reshape(logits, &[n, 3])?;
        Ok(SharedOutput {
            probs: g.softmax(logits)?,
            features,
        })
    }

    /// Probabilities `[N, M]` (arm) or `[N, 2]` (hand) from shared features.
    pub fn forward_sub(&self, g: &mut Graph<T>, vars: &[Var], features: Var, head: Head) -> Result<Var> {
        let stack = match head {
            Head::Arm => self.arm.as_ref(),
            Head::Hand => self.hand.as_ref(),
        }
        .ok_or_else(|| Error::Config("this model has no sub-networks".into()))?;
        stack.forward(&self.config, g, vars, features)
    }

    /// Category probabilities `[N, 3]` for a batch `[N, 1, C, S]`.
    pub fn category_probs(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        check_input(&self.config, x)?;
        let mut out = Vec::with_capacity(x.shape()[0] * 3);
        chunked(x, |chunk| {
            let mut g = Graph::new();
            let vars = self.params.register_frozen(&mut g);
            let xv = g.input(chunk.clone());
            let shared = self.forward_shared(&mut g, &vars, xv)?;
            out.extend_from_slice(g.value(shared.probs).data());
            Ok(())
        })?;
        Tensor::new(&[x.shape()[0], 3], out)
    }

    /// Routed predictions as task class indices. Rest-routed trials never
    /// consult a sub-network; others consult only the head their category
    /// selects.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Vec<usize>> {
        check_input(&self.config, x)?;
        let mut out = Vec::with_capacity(x.shape()[0]);
        chunked(x, |chunk| {
            let mut g = Graph::new();
            let vars = self.params.register_frozen(&mut g);
            let xv = g.input(chunk.clone());
            let shared = self.forward_shared(&mut g, &vars, xv)?;
            let cats: Vec<Category> = argmax_rows(g.value(shared.probs))
                .into_iter()
                .map(|c| Category::ALL[c])
                .collect();
            let mut preds: Vec<usize> = cats.iter().map(|&c| self.task.routed_index(c, 0)).collect();
            if self.has_heads() {
                for (cat, head) in [(Category::Arm, Head::Arm), (Category::Hand, Head::Hand)] {
                    let rows: Vec<usize> = (0..cats.len()).filter(|&i| cats[i] == cat).collect();
                    if rows.is_empty() {
                        continue;
                    }
                    let feats = g.gather_rows(shared.features, &rows)?;
                    let probs = self.forward_sub(&mut g, &vars, feats, head)?;
                    for (&r, sub) in rows.iter().zip(argmax_rows(g.value(probs))) {
                        preds[r] = self.task.routed_index(cat, sub);
                    }
                }
            }
            out.extend(preds);
            Ok(())
        })?;
        Ok(out)
    }
}

/// Single-softmax baseline: the shared trunk followed by hand-style blocks
/// and one classifier over every task class.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatModel<T: Real = f32> {
    config: EraConfig,
    task: TaskSpec,
    params: ParamSet<T>,
    trunk: Trunk,
    stack: Stack,
}

impl<T: Real> FlatModel<T> {
    pub fn new(config: EraConfig, task: TaskSpec, seed: u64) -> Result<Self> {
        let plan = EraConfig {
            arm_classes: 2,
            ..config.clone()
        }
        .shape_plan()?;
        let hand = plan.hand.expect("heads requested");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::default();
        let trunk = Trunk::build(&config, &mut params, &mut rng, "trunk");
        let k = task.num_classes();
        let stack = Stack::build(
            &mut params,
            &mut rng,
            "flat",
            config.shared_width,
            &config.hand_widths,
            &config.hand_kernels,
            hand.classifier_width,
            k,
        );
        Ok(Self {
            config,
            task,
            params,
            trunk,
            stack,
        })
    }

    pub fn config(&self) -> &EraConfig {
        &self.config
    }

    pub fn task(&self) -> &TaskSpec {
        &self.task
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    pub fn cast<U: Real>(&self) -> FlatModel<U> {
        FlatModel {
            config: self.config.clone(),
            task: self.task.clone(),
            params: self.params.cast(),
            trunk: self.trunk.clone(),
            stack: self.stack.clone(),
        }
    }

    /// Class probabilities `[N, K]`.
    pub fn forward(&self, g: &mut Graph<T>, vars: &[Var], x: Var) -> Result<Var> {
        check_input(&self.config, g.value(x))?;
        let f = self.trunk.forward(&self.config, g, vars, x)?;
        self.stack.forward(&self.config, g, vars, f)
    }

    pub fn predict(&self, x: &Tensor<T>) -> Result<Vec<usize>> {
        check_input(&self.config, x)?;
        let mut out = Vec::with_capacity(x.shape()[0]);
        chunked(x, |chunk| {
            let mut g = Graph::new();
            let vars = self.params.register_frozen(&mut g);
            let xv = g.input(chunk.clone());
            let probs = self.forward(&mut g, &vars, xv)?;
            out.extend(argmax_rows(g.value(probs)));
            Ok(())
        })?;
        Ok(out)
    }
}
