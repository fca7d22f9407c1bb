use super::config::{OffTargetTraining, ProbabilityWeighting};
use super::model::{EraModel, FlatModel};
use crate::dataset::{Category, Head, Targets, TaskSpec};
use crate::error::{Error, Result};
use crate::tensor::{Graph, Real, Tensor, Var};

/// Per-sample terms of the hierarchical loss, in `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleTerms {
    pub targets: Targets,
    /// Shared-layer probabilities in arm, hand, rest order.
    pub category_probs: [f64; 3],
    pub shared_loss: f64,
    /// Cross-entropy of the head matching the sample's category, if any.
    pub sub_loss: Option<f64>,
}

/// Breakdown of a batch loss.
#[derive(Clone, Debug, PartialEq)]
pub struct LossParts {
    pub total: f64,
    /// Mean shared-layer cross-entropy over the batch.
    pub shared: f64,
    /// Mean arm-head cross-entropy over arm samples (zero when none).
    pub arm: f64,
    /// Mean hand-head cross-entropy over hand samples (zero when none).
    pub hand: f64,
    pub samples: Vec<SampleTerms>,
}

fn onehot_rows<T: Real>(rows: &[Vec<f64>]) -> Result<Tensor<T>> {
    let k = rows.first().map_or(0, Vec::len);
    Tensor::new(&[rows.len(), k], rows.iter().flatten().map(|&v| T::lit(v)).collect())
}

fn mean_of(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

struct HeadContext<'a> {
    category_probs: Var,
    active: &'a [usize],
    targets: &'a [Targets],
    weights: &'a [[f64; 3]],
    inv_n: f64,
}

impl<T: Real> EraModel<T> {
    /// Mean over the batch of `L_s + [arm] p_a L_a + [hand] p_h L_h`.
    ///
    /// Heads run only on non-rest samples. Returns the scalar loss node and
    /// its per-sample breakdown.
    pub fn composite_loss(&self, g: &mut Graph<T>, vars: &[Var], x: &Tensor<T>, targets: &[Targets]) -> Result<(Var, LossParts)> {
        self.composite_loss_inner(g, vars, x, targets, None)
    }

    /// [`Self::composite_loss`] with the detached sub-loss weights fixed to
    /// `weights` (category probabilities per sample) instead of the current
    /// shared-layer output. Its gradient equals the detached gradient when
    /// `weights` are the model's own probabilities.
    pub fn composite_loss_pinned(
        &self,
        g: &mut Graph<T>,
        vars: &[Var],
        x: &Tensor<T>,
        targets: &[Targets],
        weights: &[[f64; 3]],
    ) -> Result<(Var, LossParts)> {
        if weights.len() != targets.len() {
            return Err(Error::Data(format!("{} weight rows for {} targets", weights.len(), targets.len())));
        }
        self.composite_loss_inner(g, vars, x, targets, Some(weights))
    }

    fn composite_loss_inner(
        &self,
        g: &mut Graph<T>,
        vars: &[Var],
        x: &Tensor<T>,
        targets: &[Targets],
        pinned: Option<&[[f64; 3]]>,
    ) -> Result<(Var, LossParts)> {
        let n = x.shape().first().copied().unwrap_or(0);
        if n == 0 || targets.len() != n {
            return Err(Error::Data(format!("{} targets for a batch of {n}", targets.len())));
        }
        let xv = g.input(x.clone());
        let shared = self.forward_shared(g, vars, xv)?;
        let cat_rows: Vec<Vec<f64>> = targets.iter().map(|t| t.category_onehot().to_vec()).collect();
        let ls = g.cross_entropy(shared.probs, &onehot_rows(&cat_rows)?)?;
        let inv_n = 1.0 / n as f64;
        let mut total = g.weighted_sum(ls, &vec![inv_n; n])?;

        let probs: Vec<[f64; 3]> = g
            .value(shared.probs)
            .data()
            .chunks(3)
            .map(|r| [r[0].as_f64(), r[1].as_f64(), r[2].as_f64()])
            .collect();
        let mut samples: Vec<SampleTerms> = targets
            .iter()
            .zip(&probs)
            .zip(g.value(ls).data())
            .map(|((t, p), l)| SampleTerms {
                targets: *t,
                category_probs: *p,
                shared_loss: l.as_f64(),
                sub_loss: None,
            })
            .collect();

        if self.has_heads() {
            for t in targets {
                if t.category != Category::Rest && t.sub.is_none() {
                    return Err(Error::Data(format!("{} sample without a sub-class target", t.category.name())));
                }
            }
            let active: Vec<usize> = (0..n).filter(|&i| targets[i].category != Category::Rest).collect();
            if !active.is_empty() {
                let feats = g.gather_rows(shared.features, &active)?;
                for (head, cat) in [(Head::Arm, Category::Arm), (Head::Hand, Category::Hand)] {
                    let head_probs = self.forward_sub(g, vars, feats, head)?;
                    let ctx = HeadContext {
                        category_probs: shared.probs,
                        active: &active,
                        targets,
                        weights: pinned.unwrap_or(&probs),
                        inv_n,
                    };
                    if let Some(term) = self.head_term(g, &ctx, head_probs, head, cat, &mut samples)? {
                        total = g.add(total, term)?;
                    }
                }
            }
        }

        let pick = |c: Category| -> Vec<f64> {
            samples
                .iter()
                .filter(|s| s.targets.category == c)
                .filter_map(|s| s.sub_loss)
                .collect()
        };
        let parts = LossParts {
            total: g.value(total).item()?.as_f64(),
            shared: mean_of(&samples.iter().map(|s| s.shared_loss).collect::<Vec<_>>()),
            arm: mean_of(&pick(Category::Arm)),
            hand: mean_of(&pick(Category::Hand)),
            samples,
        };
        Ok((total, parts))
    }

    fn head_term(
        &self,
        g: &mut Graph<T>,
        ctx: &HeadContext,
        head_probs: Var,
        head: Head,
        cat: Category,
        samples: &mut [SampleTerms],
    ) -> Result<Option<Var>> {
        let HeadContext {
            category_probs,
            active,
            targets,
            weights,
            inv_n,
        } = *ctx;
        let width = match head {
            Head::Arm => self.config().arm_classes,
            Head::Hand => 2,
        };
        // Positions within `active` that contribute, with their target rows.
        let mut local = Vec::new();
        let mut rows = Vec::new();
        for (pos, &i) in active.iter().enumerate() {
            let t = &targets[i];
            if t.category == cat {
                local.push(pos);
                rows.push(t.sub_onehot(width).expect("checked non-rest target"));
            } else if self.config().off_target == OffTargetTraining::Uniform {
                local.push(pos);
                rows.push(vec![1.0 / width as f64; width]);
            }
        }
        if local.is_empty() {
            return Ok(None);
        }
        let selected = g.gather_rows(head_probs, &local)?;
        let target = onehot_rows(&rows)?;
        let losses = match self.config().off_target {
            OffTargetTraining::Masked => g.cross_entropy(selected, &target)?,
            OffTargetTraining::Uniform => g.soft_cross_entropy(selected, &target)?,
        };
        let sample_idx: Vec<usize> = local.iter().map(|&p| active[p]).collect();
        for (&i, l) in sample_idx.iter().zip(g.value(losses).data()) {
            if targets[i].category == cat {
                samples[i].sub_loss = Some(l.as_f64());
            }
        }
        let col = cat.index();
        let term = match self.config().weighting {
            ProbabilityWeighting::Detached => {
                let w: Vec<f64> = sample_idx.iter().map(|&i| weights[i][col] * inv_n).collect();
                g.weighted_sum(losses, &w)?
            }
            ProbabilityWeighting::Differentiable => {
                let p = g.column(category_probs, col)?;
                let p = g.gather_rows(p, &sample_idx)?;
                let weighted = g.mul(p, losses)?;
                g.weighted_sum(weighted, &vec![inv_n; sample_idx.len()])?
            }
        };
        Ok(Some(term))
    }
}

impl<T: Real> FlatModel<T> {
    /// Mean cross-entropy over task classes; `labels` are class indices.
    pub fn loss(&self, g: &mut Graph<T>, vars: &[Var], x: &Tensor<T>, labels: &[usize]) -> Result<(Var, LossParts)> {
        let n = x.shape().first().copied().unwrap_or(0);
        if n == 0 || labels.len() != n {
            return Err(Error::Data(format!("{} labels for a batch of {n}", labels.len())));
        }
        let k = self.task().num_classes();
        if let Some(bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Data(format!("class index {bad} outside {k} classes")));
        }
        let xv = g.input(x.clone());
        let probs = self.forward(g, vars, xv)?;
        let rows: Vec<Vec<f64>> = labels
            .iter()
            .map(|&l| (0..k).map(|j| if j == l { 1.0 } else { 0.0 }).collect())
            .collect();
        let ce = g.cross_entropy(probs, &onehot_rows(&rows)?)?;
        let per: Vec<f64> = g.value(ce).data().iter().map(|v| v.as_f64()).collect();
        let total = g.weighted_sum(ce, &vec![1.0 / n as f64; n])?;
        Ok((
            total,
            LossParts {
                total: g.value(total).item()?.as_f64(),
                shared: mean_of(&per),
                arm: 0.0,
                hand: 0.0,
                samples: Vec::new(),
            },
        ))
    }
}

/// Targets for every label of a batch.
pub fn batch_targets(labels: &[crate::dataset::ClassLabel], task: &TaskSpec) -> Result<Vec<Targets>> {
    labels.iter().map(|&l| crate::dataset::to_targets(l, task)).collect()
}
