//! Mini-batch training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

use super::loss::softmax_cross_entropy;
use super::model::{Gradients, Mode, Model};
use super::optim::{Sgd, TrainConfig};

/// Examples per parallel work unit. Fixed so that the summation order, and
/// therefore the trajectory, does not depend on the thread count.
const CHUNK: usize = 4;

/// Indexed training examples. `rng` is private to one draw of one example
/// and drives any augmentation (e.g. random placement).
pub trait ExampleSource<F>: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn example(&self, index: usize, rng: &mut ChaCha8Rng) -> Result<(Tensor<F>, usize)>;
}

impl<F: Real> ExampleSource<F> for [(Tensor<F>, usize)] {
    fn len(&self) -> usize {
        <[_]>::len(self)
    }

    fn example(&self, index: usize, _rng: &mut ChaCha8Rng) -> Result<(Tensor<F>, usize)> {
        Ok(self[index].clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub iteration: usize,
    pub loss: f64,
    pub learning_rate: f64,
    pub grad_norm: f64,
}

/// Runs `config.iterations` SGD steps over shuffled epochs of `data`.
///
/// `on_step` sees every step after its update has been applied.
pub fn train<F, S>(
    model: &mut Model<F>,
    data: &S,
    config: &TrainConfig,
    mut on_step: impl FnMut(&StepReport, &Model<F>) -> Result<()>,
) -> Result<()>
where
    F: Real,
    S: ExampleSource<F> + ?Sized,
{
    if data.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    let mut sgd = Sgd::new(config.clone())?;
    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;

    for iteration in 0..config.iterations {
        let mut batch = Vec::with_capacity(config.batch_size);
        while batch.len() < config.batch_size {
            if cursor == order.len() {
                order = (0..data.len()).collect();
                order.shuffle(&mut order_rng);
                cursor = 0;
            }
            batch.push(order[cursor]);
            cursor += 1;
        }

        let frozen: &Model<F> = model;
        let partials = batch
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, chunk)| {
                let mut grads = Gradients::zeros_like(frozen);
                let mut loss = 0.0;
                for (k, &index) in chunk.iter().enumerate() {
                    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                    rng.set_stream((iteration * config.batch_size + c * CHUNK + k) as u64 + 1);
                    let (input, label) = data.example(index, &mut rng)?;
                    let (logits, trace) = frozen.forward_traced(&input, Mode::Train(&mut rng))?;
                    let (l, dlogits) = softmax_cross_entropy(&logits, label)?;
                    frozen.backward_into(&trace, &dlogits, &mut grads, false)?;
                    loss += l.as_f64();
                }
                Ok((grads, loss))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut parts = partials.into_iter();
        let (mut grads, mut loss) = parts.next().expect("non-empty batch");
        for (g, l) in parts {
            grads.add_assign(&g);
            loss += l;
        }
        grads.scale(F::from_f64_lossy(1.0 / batch.len() as f64));
        loss /= batch.len() as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss at iteration {iteration}")));
        }
        let grad_norm = sgd.step(model, &grads, iteration)?;
        on_step(
            &StepReport {
                iteration,
                loss,
                learning_rate: config.learning_rate_at(iteration),
                grad_norm,
            },
            model,
        )?;
    }
    Ok(())
}

/// Predicted class (arg-max logit) for one input.
pub fn predict<F: Real>(model: &Model<F>, input: &Tensor<F>) -> Result<usize> {
    Ok(model.forward(input, Mode::Eval)?.argmax())
}
