use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Softmax cross-entropy of `logits` against class `label`.
///
/// Returns the loss and its gradient `softmax(logits) - onehot(label)`.
/// Uses the log-sum-exp shift, so saturated logits do not overflow.
pub fn softmax_cross_entropy<F: Real>(logits: &Tensor<F>, label: usize) -> Result<(F, Tensor<F>)> {
    let z = logits.data();
    if label >= z.len() {
        return Err(Error::InvalidArgument(format!(
            "label {label} out of range for {} classes",
            z.len()
        )));
    }
    let max = z.iter().copied().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = z.iter().map(|&v| (v - max).exp()).collect();
    let total: F = exps.iter().copied().sum();
    let loss = total.ln() - (z[label] - max);
    let grad = exps
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let p = e / total;
            if i == label {
                p - F::one()
            } else {
                p
            }
        })
        .collect();
    Ok((loss.max(F::zero()), Tensor::new(logits.shape().to_vec(), grad)?))
}
