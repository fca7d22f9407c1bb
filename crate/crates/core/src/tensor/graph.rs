use super::kernels::{self, ConvDims, PoolDims};
use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Probability floor applied inside the logarithm of the cross-entropy.
pub const PROB_FLOOR: f64 = 1e-12;

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Param,
    Input,
    Conv2d {
        input: usize,
        kernel: usize,
        bias: usize,
        dims: ConvDims,
    },
    AvgPool {
        input: usize,
        dims: PoolDims,
    },
    Elu {
        input: usize,
        alpha: T,
    },
    Softmax {
        input: usize,
        k: usize,
    },
    CrossEntropy {
        probs: usize,
        targets: Vec<T>,
        k: usize,
    },
    Reshape {
        input: usize,
    },
    GatherRows {
        input: usize,
        indices: Vec<usize>,
    },
    Column {
        input: usize,
        col: usize,
        k: usize,
    },
    Add {
        a: usize,
        b: usize,
    },
    Mul {
        a: usize,
        b: usize,
    },
    Scale {
        input: usize,
        factor: T,
    },
    Sum {
        input: usize,
    },
    WeightedSum {
        input: usize,
        weights: Vec<T>,
    },
}

impl<T> Op<T> {
    fn name(&self) -> &'static str {
        match self {
            Op::Param => "param",
            Op::Input => "input",
            Op::Conv2d { .. } => "conv2d",
            Op::AvgPool { .. } => "avg_pool2d",
            Op::Elu { .. } => "elu",
            Op::Softmax { .. } => "softmax",
            Op::CrossEntropy { .. } => "cross_entropy",
            Op::Reshape { .. } => "reshape",
            Op::GatherRows { .. } => "gather_rows",
            Op::Column { .. } => "column",
            Op::Add { .. } => "add",
            Op::Mul { .. } => "mul",
            Op::Scale { .. } => "scale",
            Op::Sum { .. } => "sum",
            Op::WeightedSum { .. } => "weighted_sum",
        }
    }
}

#[derive(Debug)]
struct Node<T: Real> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Execution record of differentiable operations.
///
/// Nodes are appended in execution order, so the node list is already a
/// topological order and the backward pass is a single reverse sweep.
#[derive(Debug)]
pub struct Graph<T: Real = f64> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients<T: Real> {
    leaves: Vec<Option<Tensor<T>>>,
    shapes: Vec<Vec<usize>>,
    visited: Vec<usize>,
}

impl<T: Real> Gradients<T> {
    /// Gradient with respect to `var`; zeros if the loss does not depend on it.
    pub fn wrt(&self, var: Var) -> Tensor<T> {
        match self.leaves.get(var.0).and_then(Option::as_ref) {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[var.0]),
        }
    }

    /// Moves the gradient out, avoiding a copy.
    pub fn take(&mut self, var: Var) -> Tensor<T> {
        match self.leaves.get_mut(var.0).and_then(Option::take) {
            Some(g) => g,
            None => Tensor::zeros(&self.shapes[var.0]),
        }
    }

    pub fn reached(&self, var: Var) -> bool {
        matches!(self.leaves.get(var.0), Some(Some(_)))
    }

    /// Operation nodes visited during the backward sweep, in visit order.
    pub fn visit_order(&self) -> &[usize] {
        &self.visited
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn op_name(&self, v: Var) -> &'static str {
        self.nodes[v.0].op.name()
    }

    /// Trainable leaf.
    pub fn param(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Param, true)
    }

    /// Constant leaf; no gradient is computed for it.
    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Input, false)
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn record(&mut self, shape: &[usize], data: Vec<T>, op: Op<T>, parents: &[usize]) -> Result<Var> {
        let value = Tensor::new(shape, data)?;
        if !value.is_finite() {
            return Err(Error::NonFinite { op: op.name() });
        }
        let requires_grad = parents.iter().any(|&p| self.nodes[p].requires_grad);
        Ok(self.push(value, op, requires_grad))
    }

    fn shape_of(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Valid (unpadded) stride-1 convolution.
    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Var) -> Result<Var> {
        let xs = self.shape_of(input);
        let ks = self.shape_of(kernel);
        let bs = self.shape_of(bias);
        if xs.len() != 4 || ks.len() != 4 {
            return Err(Error::shape(
                "conv2d",
                format!("expected 4-D input and kernel, got {xs:?} and {ks:?}"),
            ));
        }
        if xs[1] != ks[1] {
            return Err(Error::shape(
                "conv2d",
                format!("input has {} channels but kernel expects {}", xs[1], ks[1]),
            ));
        }
        if bs != [ks[0]] {
            return Err(Error::shape(
                "conv2d",
                format!("bias shape {bs:?} does not match {} filters", ks[0]),
            ));
        }
        if ks[2] > xs[2] || ks[3] > xs[3] || ks[2] == 0 || ks[3] == 0 {
            return Err(Error::shape(
                "conv2d",
                format!(
                    "kernel extent ({}, {}) does not fit input extent ({}, {})",
                    ks[2], ks[3], xs[2], xs[3]
                ),
            ));
        }
        let dims = ConvDims {
            n: xs[0],
            cin: xs[1],
            h: xs[2],
            w: xs[3],
            f: ks[0],
            kh: ks[2],
            kw: ks[3],
        };
        let out = kernels::conv2d_forward(
            self.nodes[input.0].value.data(),
            self.nodes[kernel.0].value.data(),
            self.nodes[bias.0].value.data(),
            dims,
        );
        self.record(
            &[dims.n, dims.f, dims.ho(), dims.wo()],
            out,
            Op::Conv2d {
                input: input.0,
                kernel: kernel.0,
                bias: bias.0,
                dims,
            },
            &[input.0, kernel.0, bias.0],
        )
    }

    pub fn avg_pool2d(&mut self, input: Var, window: (usize, usize), stride: (usize, usize)) -> Result<Var> {
        let xs = self.shape_of(input);
        if xs.len() != 4 {
            return Err(Error::shape("avg_pool2d", format!("expected 4-D input, got {xs:?}")));
        }
        if window.0 == 0 || window.1 == 0 || stride.0 == 0 || stride.1 == 0 {
            return Err(Error::shape("avg_pool2d", "window and stride must be positive"));
        }
        if window.0 > xs[2] || window.1 > xs[3] {
            return Err(Error::shape(
                "avg_pool2d",
                format!("window {window:?} larger than input extent ({}, {})", xs[2], xs[3]),
            ));
        }
        let dims = PoolDims {
            planes: xs[0] * xs[1],
            h: xs[2],
            w: xs[3],
            ph: window.0,
            pw: window.1,
            sh: stride.0,
            sw: stride.1,
        };
        let shape = [xs[0], xs[1], dims.ho(), dims.wo()];
        let out = kernels::avg_pool_forward(self.nodes[input.0].value.data(), dims);
        self.record(&shape, out, Op::AvgPool { input: input.0, dims }, &[input.0])
    }

    pub fn elu(&mut self, input: Var, alpha: f64) -> Result<Var> {
        let alpha = T::lit(alpha);
        let x = &self.nodes[input.0].value;
        let shape = x.shape().to_vec();
        let out = x.data().iter().map(|&v| kernels::elu(v, alpha)).collect();
        self.record(&shape, out, Op::Elu { input: input.0, alpha }, &[input.0])
    }

    /// Row softmax of a `[N, K]` matrix.
    pub fn softmax(&mut self, logits: Var) -> Result<Var> {
        let xs = self.shape_of(logits).to_vec();
        if xs.len() != 2 || xs[1] < 2 {
            return Err(Error::shape(
                "softmax",
                format!("expected [N, K] with K >= 2, got {xs:?}"),
            ));
        }
        let out = kernels::softmax_rows(self.nodes[logits.0].value.data(), xs[1]);
        self.record(&xs, out, Op::Softmax { input: logits.0, k: xs[1] }, &[logits.0])
    }

    /// Per-sample cross-entropy `-Σ y log(max(p, floor))` against one-hot rows.
    pub fn cross_entropy(&mut self, probs: Var, onehot: &Tensor<T>) -> Result<Var> {
        for (r, row) in onehot.data().chunks(onehot.shape().last().copied().unwrap_or(1).max(1)).enumerate() {
            let ones = row.iter().filter(|&&v| v == T::one()).count();
            let zeros = row.iter().filter(|&&v| v == T::zero()).count();
            if ones != 1 || ones + zeros != row.len() {
                return Err(Error::Data(format!("target row {r} is not a one-hot vector")));
            }
        }
        self.soft_cross_entropy(probs, onehot)
    }

    /// Cross-entropy against arbitrary target distributions (rows summing to one).
    pub fn soft_cross_entropy(&mut self, probs: Var, targets: &Tensor<T>) -> Result<Var> {
        let ps = self.shape_of(probs).to_vec();
        if ps.len() != 2 || targets.shape() != ps.as_slice() {
            return Err(Error::shape(
                "cross_entropy",
                format!("probs {ps:?} and targets {:?} must both be [N, K]", targets.shape()),
            ));
        }
        let k = ps[1];
        let p = self.nodes[probs.0].value.data();
        let tol = if std::mem::size_of::<T>() == 4 { 1e-4 } else { 1e-9 };
        for (r, row) in p.chunks_exact(k).enumerate() {
            let s: f64 = row.iter().map(|v| v.as_f64()).sum();
            if (s - 1.0).abs() > tol || row.iter().any(|&v| v < T::zero()) {
                return Err(Error::Data(format!(
                    "probability row {r} is not a distribution (sum {s})"
                )));
            }
        }
        for (r, row) in targets.data().chunks_exact(k).enumerate() {
            let s: f64 = row.iter().map(|v| v.as_f64()).sum();
            if (s - 1.0).abs() > 1e-9 || row.iter().any(|&v| v < T::zero()) {
                return Err(Error::Data(format!("target row {r} is not a distribution")));
            }
        }
        let floor = T::lit(PROB_FLOOR);
        let out: Vec<T> = p
            .chunks_exact(k)
            .zip(targets.data().chunks_exact(k))
            .map(|(pr, yr)| {
                -pr.iter()
                    .zip(yr)
                    .filter(|(_, &y)| y != T::zero())
                    .map(|(&pv, &y)| y * pv.max(floor).ln())
                    .sum::<T>()
            })
            .collect();
        self.record(
            &[ps[0]],
            out,
            Op::CrossEntropy {
                probs: probs.0,
                targets: targets.data().to_vec(),
                k,
            },
            &[probs.0],
        )
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        let x = &self.nodes[input.0].value;
        if shape.iter().product::<usize>() != x.len() {
            return Err(Error::shape(
                "reshape",
                format!("cannot view {:?} as {shape:?}", x.shape()),
            ));
        }
        let data = x.data().to_vec();
        self.record(shape, data, Op::Reshape { input: input.0 }, &[input.0])
    }

    /// Rows of `input` (leading axis) at `indices`, in the given order.
    pub fn gather_rows(&mut self, input: Var, indices: &[usize]) -> Result<Var> {
        let selected = self.nodes[input.0].value.select_rows(indices)?;
        let shape = selected.shape().to_vec();
        self.record(
            &shape,
            selected.into_data(),
            Op::GatherRows {
                input: input.0,
                indices: indices.to_vec(),
            },
            &[input.0],
        )
    }

    /// Column `col` of a `[N, K]` matrix as a `[N]` vector.
    pub fn column(&mut self, input: Var, col: usize) -> Result<Var> {
        let xs = self.shape_of(input).to_vec();
        if xs.len() != 2 || col >= xs[1] {
            return Err(Error::shape("column", format!("column {col} of {xs:?}")));
        }
        let k = xs[1];
        let out = self.nodes[input.0]
            .value
            .data()
            .chunks_exact(k)
            .map(|r| r[col])
            .collect();
        self.record(&[xs[0]], out, Op::Column { input: input.0, col, k }, &[input.0])
    }

    fn binary(&mut self, a: Var, b: Var, name: &'static str) -> Result<Vec<usize>> {
        let (sa, sb) = (self.shape_of(a), self.shape_of(b));
        if sa != sb {
            return Err(Error::shape(name, format!("{sa:?} vs {sb:?}")));
        }
        Ok(sa.to_vec())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let shape = self.binary(a, b, "add")?;
        let out = self.nodes[a.0]
            .value
            .data()
            .iter()
            .zip(self.nodes[b.0].value.data())
            .map(|(&x, &y)| x + y)
            .collect();
        self.record(&shape, out, Op::Add { a: a.0, b: b.0 }, &[a.0, b.0])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let shape = self.binary(a, b, "mul")?;
        let out = self.nodes[a.0]
            .value
            .data()
            .iter()
            .zip(self.nodes[b.0].value.data())
            .map(|(&x, &y)| x * y)
            .collect();
        self.record(&shape, out, Op::Mul { a: a.0, b: b.0 }, &[a.0, b.0])
    }

    pub fn scale(&mut self, input: Var, factor: f64) -> Result<Var> {
        let factor = T::lit(factor);
        let x = &self.nodes[input.0].value;
        let shape = x.shape().to_vec();
        let out = x.data().iter().map(|&v| v * factor).collect();
        self.record(&shape, out, Op::Scale { input: input.0, factor }, &[input.0])
    }

    /// Sum of all elements as a scalar.
    pub fn sum(&mut self, input: Var) -> Result<Var> {
        let s: T = self.nodes[input.0].value.data().iter().copied().sum();
        self.record(&[], vec![s], Op::Sum { input: input.0 }, &[input.0])
    }

    pub fn mean(&mut self, input: Var) -> Result<Var> {
        let n = self.nodes[input.0].value.len();
        if n == 0 {
            return Err(Error::shape("mean", "empty tensor"));
        }
        let s = self.sum(input)?;
        self.scale(s, 1.0 / n as f64)
    }

    /// `Σ w_i x_i` over a `[N]` vector with constant weights.
    pub fn weighted_sum(&mut self, input: Var, weights: &[f64]) -> Result<Var> {
        let xs = self.shape_of(input);
        if xs.len() != 1 || xs[0] != weights.len() {
            return Err(Error::shape(
                "weighted_sum",
                format!("{} weights for input {xs:?}", weights.len()),
            ));
        }
        let weights: Vec<T> = weights.iter().map(|&w| T::lit(w)).collect();
        let s: T = self.nodes[input.0]
            .value
            .data()
            .iter()
            .zip(&weights)
            .map(|(&x, &w)| x * w)
            .sum();
        self.record(
            &[],
            vec![s],
            Op::WeightedSum {
                input: input.0,
                weights,
            },
            &[input.0],
        )
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.nodes.is_empty() {
            return Err(Error::Graph("backward called before any forward operation".into()));
        }
        let Some(root) = self.nodes.get(loss.0) else {
            return Err(Error::Graph(format!("loss node {} is not on this graph", loss.0)));
        };
        if root.value.len() != 1 {
            return Err(Error::Graph(format!(
                "loss must be a scalar, got shape {:?}",
                root.value.shape()
            )));
        }

        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut visited = Vec::new();
        grads[loss.0] = Some(Tensor::full(root.value.shape(), T::one()));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Param) {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            visited.push(idx);
            self.propagate(idx, g, &mut grads);
        }

        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        for (idx, node) in self.nodes.iter().enumerate() {
            if !matches!(node.op, Op::Param) {
                grads[idx] = None;
            }
        }
        Ok(Gradients {
            leaves: grads,
            shapes,
            visited,
        })
    }

    fn wants(&self, idx: usize) -> bool {
        self.nodes[idx].requires_grad
    }

    fn propagate(&self, idx: usize, g: Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let node = &self.nodes[idx];
        let gd = g.data();
        match &node.op {
            Op::Param | Op::Input => {}
            Op::Conv2d {
                input,
                kernel,
                bias,
                dims,
            } => {
                if self.wants(*input) {
                    let dx = kernels::conv2d_backward_input(gd, self.nodes[*kernel].value.data(), *dims);
                    self.accumulate(grads, *input, dx);
                }
                if self.wants(*kernel) || self.wants(*bias) {
                    let (dk, db) = kernels::conv2d_backward_params(gd, self.nodes[*input].value.data(), *dims);
                    self.accumulate(grads, *kernel, dk);
                    self.accumulate(grads, *bias, db);
                }
            }
            Op::AvgPool { input, dims } => {
                let dx = kernels::avg_pool_backward(gd, *dims);
                self.accumulate(grads, *input, dx);
            }
            Op::Elu { input, alpha } => {
                let x = self.nodes[*input].value.data();
                let dx = x
                    .iter()
                    .zip(gd)
                    .map(|(&xv, &gv)| gv * kernels::elu_grad(xv, *alpha))
                    .collect();
                self.accumulate(grads, *input, dx);
            }
            Op::Softmax { input, k } => {
                let dx = kernels::softmax_rows_backward(node.value.data(), gd, *k);
                self.accumulate(grads, *input, dx);
            }
            Op::CrossEntropy { probs, targets, k } => {
                let floor = T::lit(PROB_FLOOR);
                let p = self.nodes[*probs].value.data();
                let mut dp = vec![T::zero(); p.len()];
                for (i, &gi) in gd.iter().enumerate() {
                    for c in 0..*k {
                        let j = i * k + c;
                        let y = targets[j];
                        if y != T::zero() && p[j] > floor {
                            dp[j] = -gi * y / p[j];
                        }
                    }
                }
                self.accumulate(grads, *probs, dp);
            }
            Op::Reshape { input } => {
                self.accumulate(grads, *input, gd.to_vec());
            }
            Op::GatherRows { input, indices } => {
                let xs = self.nodes[*input].value.shape();
                let row: usize = xs[1..].iter().product();
                let mut dx = vec![T::zero(); self.nodes[*input].value.len()];
                for (r, &src) in indices.iter().enumerate() {
                    for (d, &gv) in dx[src * row..(src + 1) * row].iter_mut().zip(&gd[r * row..(r + 1) * row]) {
                        *d += gv;
                    }
                }
                self.accumulate(grads, *input, dx);
            }
            Op::Column { input, col, k } => {
                let mut dx = vec![T::zero(); self.nodes[*input].value.len()];
                for (i, &gv) in gd.iter().enumerate() {
                    dx[i * k + col] = gv;
                }
                self.accumulate(grads, *input, dx);
            }
            Op::Add { a, b } => {
                self.accumulate(grads, *a, gd.to_vec());
                self.accumulate(grads, *b, gd.to_vec());
            }
            Op::Mul { a, b } => {
                let (va, vb) = (self.nodes[*a].value.data(), self.nodes[*b].value.data());
                let da = gd.iter().zip(vb).map(|(&gv, &y)| gv * y).collect();
                let db = gd.iter().zip(va).map(|(&gv, &x)| gv * x).collect();
                self.accumulate(grads, *a, da);
                self.accumulate(grads, *b, db);
            }
            Op::Scale { input, factor } => {
                let dx = gd.iter().map(|&gv| gv * *factor).collect();
                self.accumulate(grads, *input, dx);
            }
            Op::Sum { input } => {
                let n = self.nodes[*input].value.len();
                self.accumulate(grads, *input, vec![gd[0]; n]);
            }
            Op::WeightedSum { input, weights } => {
                let dx = weights.iter().map(|&w| w * gd[0]).collect();
                self.accumulate(grads, *input, dx);
            }
        }
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], target: usize, delta: Vec<T>) {
        if !self.wants(target) {
            return;
        }
        match &mut grads[target] {
            Some(existing) => {
                for (e, d) in existing.data_mut().iter_mut().zip(delta) {
                    *e += d;
                }
            }
            slot @ None => {
                let shape = self.nodes[target].value.shape();
                *slot = Some(Tensor::new(shape, delta).expect("gradient matches value shape"));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: &[f64]) -> Tensor<f64> {
        Tensor::new(shape, v.to_vec()).unwrap()
    }

    #[test]
    fn conv_hand_example() {
        let mut g = Graph::<f64>::new();
        let x = g.input(t(&[1, 1, 1, 4], &[1.0, 2.0, 3.0, 4.0]));
        let k = g.param(t(&[1, 1, 1, 2], &[1.0, -1.0]));
        let b = g.param(t(&[1], &[0.0]));
        let y = g.conv2d(x, k, b).unwrap();
        assert_eq!(g.value(y).shape(), &[1, 1, 1, 3]);
        assert_eq!(g.value(y).data(), &[-1.0, -1.0, -1.0]);
    }

    #[test]
    fn conv_table_shape() {
        let mut g = Graph::<f32>::new();
        let x = g.input(Tensor::zeros(&[1, 1, 24, 751]));
        let k = g.param(Tensor::zeros(&[36, 1, 1, 63]));
        let b = g.param(Tensor::full(&[36], 0.5));
        let y = g.conv2d(x, k, b).unwrap();
        assert_eq!(g.value(y).shape(), &[1, 36, 24, 689]);
        assert!(g.value(y).data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn conv_rejects_bad_shapes() {
        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::zeros(&[1, 2, 3, 3]));
        let k = g.param(Tensor::zeros(&[1, 3, 1, 1]));
        let b = g.param(Tensor::zeros(&[1]));
        assert!(matches!(g.conv2d(x, k, b), Err(Error::Shape { .. })));
        let big = g.param(Tensor::zeros(&[1, 2, 4, 1]));
        assert!(g.conv2d(x, big, b).is_err());
    }

    #[test]
    fn pool_examples() {
        let mut g = Graph::<f64>::new();
        let x = g.input(t(&[1, 1, 1, 6], &[3.0, 6.0, 9.0, 12.0, 15.0, 18.0]));
        let y = g.avg_pool2d(x, (1, 3), (1, 3)).unwrap();
        assert_eq!(g.value(y).data(), &[6.0, 15.0]);
        let c = g.input(Tensor::full(&[1, 2, 1, 689], 4.25));
        let y = g.avg_pool2d(c, (1, 3), (1, 3)).unwrap();
        assert_eq!(g.value(y).shape(), &[1, 2, 1, 229]);
        assert!(g.value(y).data().iter().all(|&v| (v - 4.25).abs() < 1e-15));
        let short = g.input(Tensor::zeros(&[1, 1, 1, 2]));
        assert!(g.avg_pool2d(short, (1, 3), (1, 3)).is_err());
    }

    #[test]
    fn elu_examples() {
        let mut g = Graph::<f64>::new();
        let x = g.input(t(&[3], &[0.0, 2.0, -1.0]));
        let y = g.elu(x, 1.0).unwrap();
        let v = g.value(y).data();
        assert_eq!(v[0], 0.0);
        assert_eq!(v[1], 2.0);
        assert!((v[2] - ((-1.0f64).exp() - 1.0)).abs() < 1e-15);
        assert!((v[2] + 0.6321).abs() < 1e-4);
    }

    #[test]
    fn softmax_examples() {
        let mut g = Graph::<f64>::new();
        let x = g.input(t(&[3, 3], &[0.0, 0.0, 0.0, 1000.0, 0.0, -5.0, 0.0, 2f64.ln(), 3f64.ln()]));
        let p = g.softmax(x).unwrap();
        let v = g.value(p).data();
        for &u in &v[0..3] {
            assert!((u - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((v[3] - 1.0).abs() < 1e-15 && v[4] < 1e-300);
        assert!((v[6] - 1.0 / 6.0).abs() < 1e-15);
        assert!((v[7] - 2.0 / 6.0).abs() < 1e-15);
        assert!((v[8] - 3.0 / 6.0).abs() < 1e-15);
        let bad = g.input(Tensor::zeros(&[2, 1]));
        assert!(g.softmax(bad).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        let mut g = Graph::<f64>::new();
        let perfect = g.input(t(&[1, 3], &[0.0, 1.0, 0.0]));
        let y = t(&[1, 3], &[0.0, 1.0, 0.0]);
        let l = g.cross_entropy(perfect, &y).unwrap();
        assert_eq!(g.value(l).data(), &[0.0]);

        let u3 = g.input(Tensor::full(&[1, 3], 1.0 / 3.0));
        let l = g.cross_entropy(u3, &y).unwrap();
        assert!((g.value(l).data()[0] - 3f64.ln()).abs() < 1e-12);

        let u7 = g.input(Tensor::full(&[1, 7], 1.0 / 7.0));
        let mut y7 = Tensor::zeros(&[1, 7]);
        y7.data_mut()[4] = 1.0;
        let l = g.cross_entropy(u7, &y7).unwrap();
        assert!((g.value(l).data()[0] - 1.9459).abs() < 1e-4);

        let not_onehot = t(&[1, 3], &[0.5, 0.5, 0.0]);
        assert!(matches!(g.cross_entropy(u3, &not_onehot), Err(Error::Data(_))));
    }

    #[test]
    fn cross_entropy_floor_avoids_infinity() {
        let mut g = Graph::<f64>::new();
        let p = g.input(t(&[1, 2], &[1.0, 0.0]));
        let l = g.cross_entropy(p, &t(&[1, 2], &[0.0, 1.0])).unwrap();
        assert!((g.value(l).data()[0] + PROB_FLOOR.ln()).abs() < 1e-12);
    }

    #[test]
    fn backward_examples() {
        let mut g = Graph::<f64>::new();
        let x = g.param(t(&[4], &[1.0, -2.0, 3.0, 0.5]));
        let s = g.sum(x).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.wrt(x).data(), &[1.0; 4]);

        let mut g = Graph::<f64>::new();
        let x = g.param(t(&[4], &[1.0, -2.0, 3.0, 0.5]));
        let sq = g.mul(x, x).unwrap();
        let s = g.sum(sq).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.wrt(x).data(), &[2.0, -4.0, 6.0, 1.0]);
    }

    #[test]
    fn unreached_params_get_zero_gradient() {
        let mut g = Graph::<f64>::new();
        let x = g.param(t(&[2], &[1.0, 2.0]));
        let unused = g.param(t(&[3], &[1.0, 2.0, 3.0]));
        let s = g.sum(x).unwrap();
        let grads = g.backward(s).unwrap();
        assert!(!grads.reached(unused));
        assert_eq!(grads.wrt(unused).data(), &[0.0; 3]);
    }

    #[test]
    fn backward_errors() {
        let g = Graph::<f64>::new();
        assert!(matches!(g.backward(Var(0)), Err(Error::Graph(_))));
        let mut g = Graph::<f64>::new();
        let x = g.param(t(&[2], &[1.0, 2.0]));
        assert!(matches!(g.backward(x), Err(Error::Graph(_))));
    }

    #[test]
    fn backward_visits_each_op_once_in_reverse() {
        let mut g = Graph::<f64>::new();
        let x = g.param(t(&[3], &[0.1, -0.2, 0.3]));
        let a = g.elu(x, 1.0).unwrap();
        let b = g.scale(a, 2.0).unwrap();
        let c = g.add(a, b).unwrap();
        let s = g.sum(c).unwrap();
        let grads = g.backward(s).unwrap();
        let order = grads.visit_order().to_vec();
        let mut expected: Vec<usize> = (a.index()..=s.index()).collect();
        expected.reverse();
        assert_eq!(order, expected);
        // a feeds two ops: its gradient is 1 + 2 = 3 times elu'(x).
        let gx = grads.wrt(x);
        assert!((gx.data()[0] - 3.0).abs() < 1e-15);
        assert!((gx.data()[1] - 3.0 * (-0.2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn non_finite_results_are_errors() {
        let mut g = Graph::<f64>::new();
        let x = g.input(t(&[1], &[f64::MAX]));
        assert!(matches!(g.scale(x, 10.0), Err(Error::NonFinite { .. })));
    }
}
