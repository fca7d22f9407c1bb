use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Shrinkage intensity selection.
#[derive(Clone, Copy, Debug, PartialEq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shrinkage {
    /// Analytic Ledoit-Wolf estimate, clipped to `[0, 1]`.
    #[default]
    Auto,
    Fixed(f64),
}

/// Linear discriminant with a shrunken pooled covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct RldaModel {
    /// `classes × dim`.
    pub means: DMatrix<f64>,
    pub inv_cov: DMatrix<f64>,
    pub lambda: f64,
    pub log_priors: Vec<f64>,
}

fn as_matrix(features: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let dim = features.first().map_or(0, Vec::len);
    if dim == 0 || features.iter().any(|f| f.len() != dim) {
        return Err(Error::Data("feature rows must share one non-zero length".into()));
    }
    Ok(DMatrix::from_fn(features.len(), dim, |i, j| features[i][j]))
}

/// Ledoit-Wolf intensity for centred rows `x` (n × p).
pub fn ledoit_wolf(x: &DMatrix<f64>) -> f64 {
    let n = x.nrows() as f64;
    let p = x.ncols();
    let s = x.transpose() * x / n;
    let mu = s.trace() / p as f64;
    let target = DMatrix::<f64>::identity(p, p) * mu;
    let d2 = (&s - &target).norm_squared();
    if d2 <= 0.0 {
        return 1.0;
    }
    let mut b2 = 0.0;
    for row in x.row_iter() {
        let outer = row.transpose() * row;
        b2 += (outer - &s).norm_squared();
    }
    b2 /= n * n;
    (b2.min(d2) / d2).clamp(0.0, 1.0)
}

pub fn rlda_fit(features: &[Vec<f64>], labels: &[usize], shrinkage: Shrinkage) -> Result<RldaModel> {
    let x = as_matrix(features)?;
    if labels.len() != x.nrows() {
        return Err(Error::Data(format!("{} labels for {} feature rows", labels.len(), x.nrows())));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; classes];
    for &l in labels {
        counts[l] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::Data("discriminant analysis needs at least two classes".into()));
    }
    let dim = x.ncols();
    let mut means = DMatrix::zeros(classes, dim);
    for (row, &l) in x.row_iter().zip(labels) {
        let mut m = means.row_mut(l);
        m += row;
    }
    for (k, &c) in counts.iter().enumerate() {
        if c > 0 {
            let mut m = means.row_mut(k);
            m /= c as f64;
        }
    }
    let mut centred = x.clone();
    for (i, &l) in labels.iter().enumerate() {
        let m = means.row(l).clone_owned();
        let mut r = centred.row_mut(i);
        r -= m;
    }
    let lambda = match shrinkage {
        Shrinkage::Auto => ledoit_wolf(&centred),
        Shrinkage::Fixed(l) if (0.0..=1.0).contains(&l) => l,
        Shrinkage::Fixed(l) => return Err(Error::Config(format!("shrinkage {l} outside [0, 1]"))),
    };
    let s = centred.transpose() * &centred / x.nrows() as f64;
    let mu = s.trace() / dim as f64;
    let shrunk = s * (1.0 - lambda) + DMatrix::<f64>::identity(dim, dim) * (lambda * mu);
    let inv_cov = shrunk
        .cholesky()
        .ok_or_else(|| Error::Numeric("shrunken covariance is not positive definite".into()))?
        .inverse();
    let n = labels.len() as f64;
    let log_priors = counts
        .iter()
        .map(|&c| if c == 0 { f64::NEG_INFINITY } else { (c as f64 / n).ln() })
        .collect();
    Ok(RldaModel {
        means,
        inv_cov,
        lambda,
        log_priors,
    })
}

impl RldaModel {
    pub fn classes(&self) -> usize {
        self.means.nrows()
    }

    /// Discriminant score per class for one feature vector.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(x);
        (0..self.classes())
            .map(|k| {
                let m = self.means.row(k).transpose();
                let a = &self.inv_cov * &m;
                x.dot(&a) - 0.5 * m.dot(&a) + self.log_priors[k]
            })
            .collect()
    }

    pub fn predict_one(&self, x: &[f64]) -> usize {
        crate::era::argmax(&self.scores(x))
    }
}

pub fn rlda_predict(model: &RldaModel, features: &[Vec<f64>]) -> Result<Vec<usize>> {
    let dim = model.means.ncols();
    if let Some(bad) = features.iter().find(|f| f.len() != dim) {
        return Err(Error::Data(format!("feature length {} (model expects {dim})", bad.len())));
    }
    Ok(features.iter().map(|f| model.predict_one(f)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_clouds() {
        let mut f = Vec::new();
        let mut l = Vec::new();
        for i in 0..40 {
            let j = (i as f64 * 0.37).sin() * 0.3;
            f.push(vec![j, 1.0 + j * 0.5]);
            l.push(0);
            f.push(vec![5.0 + j, -1.0 - j]);
            l.push(1);
        }
        let m = rlda_fit(&f, &l, Shrinkage::Auto).unwrap();
        assert!((0.0..=1.0).contains(&m.lambda));
        assert_eq!(rlda_predict(&m, &f).unwrap(), l);
    }

    #[test]
    fn single_class_fails() {
        let f = vec![vec![1.0], vec![2.0]];
        assert!(rlda_fit(&f, &[0, 0], Shrinkage::Auto).is_err());
    }
}
