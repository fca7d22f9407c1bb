use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Diagonal loading added to every class covariance.
pub const COVARIANCE_SHRINKAGE: f64 = 1e-6;

/// Spatial filters of one two-class split, columns ordered by descending
/// generalized eigenvalue: the first `n_pairs` maximise class-a variance,
/// the last `n_pairs` maximise class-b variance.
#[derive(Clone, Debug, PartialEq)]
pub struct CspFilters {
    /// `channels × 2·n_pairs`.
    pub filters: DMatrix<f64>,
    /// Generalized eigenvalues of the kept filters, same order.
    pub eigenvalues: Vec<f64>,
}

/// Mean-removed channel covariance of one `[channels, samples]` trial.
pub fn trial_covariance(trial: &[f64], channels: usize) -> DMatrix<f64> {
    let samples = trial.len() / channels;
    let mut centred = DMatrix::from_row_slice(channels, samples, trial);
    for mut row in centred.row_iter_mut() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
    }
    let denom = (samples.max(2) - 1) as f64;
    (&centred * centred.transpose()) / denom
}

/// Average covariance over trials with diagonal loading.
pub fn class_covariance<'a>(trials: impl IntoIterator<Item = &'a [f64]>, channels: usize) -> Result<DMatrix<f64>> {
    let mut acc = DMatrix::zeros(channels, channels);
    let mut count = 0usize;
    for t in trials {
        acc += trial_covariance(t, channels);
        count += 1;
    }
    if count < 2 {
        return Err(Error::Data(format!("CSP needs at least 2 trials per class, got {count}")));
    }
    acc /= count as f64;
    for i in 0..channels {
        acc[(i, i)] += COVARIANCE_SHRINKAGE;
    }
    Ok(acc)
}

/// Solves `C_a w = λ (C_a + C_b) w` by whitening the composite covariance.
/// Returns all eigenvalues (descending) and the matching filters as columns.
pub fn generalized_eigen(ca: &DMatrix<f64>, cb: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = ca.nrows();
    if ca.shape() != (n, n) || cb.shape() != (n, n) || n == 0 {
        return Err(Error::shape("csp", format!("covariances {:?} and {:?}", ca.shape(), cb.shape())));
    }
    let composite = ca + cb;
    let eig = SymmetricEigen::new(composite.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > 0.0) || !max.is_finite() || min <= max * 1e-14 {
        return Err(Error::Numeric(format!(
            "composite covariance is rank deficient (eigenvalues {min:e} .. {max:e})"
        )));
    }
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    let whitening = &inv_sqrt * eig.eigenvectors.transpose();
    let s = &whitening * ca * whitening.transpose();
    let s = (&s + s.transpose()) * 0.5;
    let inner = SymmetricEigen::new(s);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        inner.eigenvalues[b]
            .partial_cmp(&inner.eigenvalues[a])
            .expect("finite eigenvalues")
            .then(a.cmp(&b))
    });
    let full = whitening.transpose() * &inner.eigenvectors;
    let mut filters = DMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = full.column(src).clone_owned();
        let pivot = col.iamax();
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        filters.set_column(dst, &col);
        values.push(inner.eigenvalues[src]);
    }
    Ok((values, filters))
}

/// Keeps the top and bottom `n_pairs` generalized eigenvectors.
pub fn csp_from_covariances(ca: &DMatrix<f64>, cb: &DMatrix<f64>, n_pairs: usize) -> Result<CspFilters> {
    let n = ca.nrows();
    if n_pairs == 0 || 2 * n_pairs > n {
        return Err(Error::Config(format!("{n_pairs} filter pairs need at least {} channels, got {n}", 2 * n_pairs)));
    }
    let (values, all) = generalized_eigen(ca, cb)?;
    let keep: Vec<usize> = (0..n_pairs).chain(n - n_pairs..n).collect();
    Ok(CspFilters {
        filters: all.select_columns(&keep),
        eigenvalues: keep.iter().map(|&i| values[i]).collect(),
    })
}

/// Fits CSP filters separating trials `a` from trials `b`.
pub fn csp_fit<'a>(
    a: impl IntoIterator<Item = &'a [f64]>,
    b: impl IntoIterator<Item = &'a [f64]>,
    channels: usize,
    n_pairs: usize,
) -> Result<CspFilters> {
    let ca = class_covariance(a, channels)?;
    let cb = class_covariance(b, channels)?;
    csp_from_covariances(&ca, &cb, n_pairs)
}

/// Log-variance of each spatially filtered signal of one trial.
pub fn log_variance(trial: &[f64], channels: usize, filters: &DMatrix<f64>) -> Vec<f64> {
    let samples = trial.len() / channels;
    let x = DMatrix::from_row_slice(channels, samples, trial);
    let projected = filters.transpose() * x;
    projected
        .row_iter()
        .map(|row| {
            let mean = row.mean();
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples.max(2) - 1) as f64;
            var.max(f64::MIN_POSITIVE).ln()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filters_jointly_normalise_covariances() {
        let ca = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let cb = DMatrix::from_row_slice(3, 3, &[1.0, 0.1, 0.0, 0.1, 2.0, 0.3, 0.0, 0.3, 5.0]);
        let (values, w) = generalized_eigen(&ca, &cb).unwrap();
        assert!(values.windows(2).all(|p| p[0] >= p[1]));
        for (i, col) in w.column_iter().enumerate() {
            let a = (col.transpose() * &ca * col)[(0, 0)];
            let b = (col.transpose() * &cb * col)[(0, 0)];
            assert!((a + b - 1.0).abs() < 1e-8);
            assert!((a - values[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn identical_classes_give_half() {
        let c = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let (values, _) = generalized_eigen(&c, &c).unwrap();
        assert!(values.iter().all(|v| (v - 0.5).abs() < 1e-10));
    }

    #[test]
    fn singular_composite_is_rejected() {
        let z = DMatrix::zeros(3, 3);
        assert!(generalized_eigen(&z, &z).unwrap_err().is_numeric());
    }

    #[test]
    fn scaling_a_trial_shifts_log_variance() {
        let trial: Vec<f64> = (0..200).map(|i| ((i * 37) % 17) as f64 - 8.0 + (i % 3) as f64).collect();
        let w = DMatrix::identity(2, 2);
        let a = log_variance(&trial, 2, &w);
        let doubled: Vec<f64> = trial.iter().map(|v| v * 2.0).collect();
        let b = log_variance(&doubled, 2, &w);
        for (x, y) in a.iter().zip(&b) {
            assert!((y - x - 4f64.ln()).abs() < 1e-12);
        }
    }
}
