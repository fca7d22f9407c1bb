use serde::{Deserialize, Serialize};

use super::train::Predictor;
use crate::dataset::{EpochSet, TaskSpec};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

pub fn evaluate(predicted: &[usize], truth: &[usize], classes: usize) -> Result<Evaluation> {
    if truth.is_empty() || predicted.len() != truth.len() {
        return Err(Error::Data(format!("{} predictions for {} test trials", predicted.len(), truth.len())));
    }
    let mut confusion = vec![vec![0usize; classes]; classes];
    let mut correct = 0;
    for (&p, &t) in predicted.iter().zip(truth) {
        if p >= classes || t >= classes {
            return Err(Error::Data(format!("class index {} outside {classes} classes", p.max(t))));
        }
        confusion[t][p] += 1;
        correct += usize::from(p == t);
    }
    Ok(Evaluation {
        accuracy: correct as f64 / truth.len() as f64,
        confusion,
    })
}

/// Task class index of every trial.
pub fn truth_indices(set: &EpochSet, task: &TaskSpec) -> Result<Vec<usize>> {
    set.labels.iter().map(|&l| task.class_index(l)).collect()
}

pub fn evaluate_set(model: &dyn Predictor, set: &EpochSet, task: &TaskSpec) -> Result<Evaluation> {
    let truth = truth_indices(set, task)?;
    let predicted = model.predict_set(set)?;
    evaluate(&predicted, &truth, task.num_classes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_and_constant_predictors() {
        let truth: Vec<usize> = (0..25).map(|i| i % 5).collect();
        let e = evaluate(&truth, &truth, 5).unwrap();
        assert_eq!(e.accuracy, 1.0);
        for (i, row) in e.confusion.iter().enumerate() {
            assert_eq!(row[i], 5);
            assert_eq!(row.iter().sum::<usize>(), 5);
        }
        let c = evaluate(&[2; 25], &truth, 5).unwrap();
        assert_eq!(c.accuracy, 0.2);
    }

    #[test]
    fn out_of_range_label_fails() {
        assert!(evaluate(&[0], &[7], 7).is_err());
    }
}
