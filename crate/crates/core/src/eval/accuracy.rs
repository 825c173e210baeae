use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::{predict, ExampleSource, Model};
use crate::tensor::Real;

/// Fraction of examples whose arg-max prediction matches the label.
pub fn accuracy<F: Real, S: ExampleSource<F> + ?Sized>(model: &Model<F>, data: &S) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Data("accuracy of an empty fold".into()));
    }
    let correct: Vec<bool> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(i as u64);
            let (x, y) = data.example(i, &mut rng)?;
            Ok(predict(model, &x)? == y)
        })
        .collect::<Result<_>>()?;
    Ok(correct.iter().filter(|&&c| c).count() as f64 / data.len() as f64)
}

/// Per-fold accuracies with their mean and sample standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldSummary {
    pub folds: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl FoldSummary {
    pub fn from_folds(folds: Vec<f64>) -> Result<Self> {
        if folds.is_empty() {
            return Err(Error::Data("no folds to summarize".into()));
        }
        let n = folds.len() as f64;
        let mean = folds.iter().sum::<f64>() / n;
        let std = if folds.len() > 1 {
            (folds.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(FoldSummary { folds, mean, std })
    }
}

/// Evaluates one model per fold on that fold's held-out data.
pub fn evaluate_accuracy<F, S>(folds: &[(&Model<F>, &S)]) -> Result<FoldSummary>
where
    F: Real,
    S: ExampleSource<F> + ?Sized,
{
    let accs = folds.iter().map(|(m, d)| accuracy(*m, *d)).collect::<Result<Vec<_>>>()?;
    FoldSummary::from_folds(accs)
}
