//! Layer-wise relevance propagation.
//!
//! Relevance starts at one output logit and is pushed back layer by layer.
//! At a weight layer every upper neuron `j` hands its relevance `R_j` to its
//! inputs in proportion to their forward contributions `z_ij = x_i·w_ij`:
//!
//! ```text
//! R_i = Σ_j z_ij / (Σ_i' z_i'j + b_j ± ε) · R_j
//! ```
//!
//! which is evaluated as `R = x ⊙ Wᵀ(R_out / denominator)`. Max pooling
//! routes relevance to the recorded winner; ReLU, flatten and (inactive)
//! dropout pass it through unchanged.

use serde::{Deserialize, Serialize};

use crate::blob;
use crate::error::{Error, Result};
use crate::nn::kernels::{scatter_argmax, ConvGeom};
use crate::nn::model::{dense_transpose, ActivationTrace, Model};
use crate::nn::spec::LayerSpec;
use crate::tensor::{Real, Tensor};

/// What happens to the share of relevance attributed to a bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiasHandling {
    /// The bias sits in the denominator; its share is dropped.
    Absorb,
    /// The bias share is spread evenly over the neuron's receptive field.
    Distribute,
}

/// How the output layer is seeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputInit {
    /// The target's pre-softmax logit value.
    Logit,
    /// A constant 1 at the target.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LrpConfig {
    pub epsilon: f64,
    pub bias: BiasHandling,
    pub init: OutputInit,
}

impl Default for LrpConfig {
    fn default() -> Self {
        LrpConfig {
            epsilon: 1e-6,
            bias: BiasHandling::Absorb,
            init: OutputInit::Logit,
        }
    }
}

impl LrpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Config(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Relevance scores aligned element-for-element with a model input.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceMap<F> {
    pub relevance: Tensor<F>,
    pub target: usize,
    pub epsilon: f64,
}

impl<F: Real> RelevanceMap<F> {
    pub fn total(&self) -> f64 {
        self.relevance.sum_f64()
    }

    /// Binary tensor blob; the descriptor names the explained model.
    pub fn encode(&self, model_descriptor: &str) -> Vec<u8> {
        blob::encode("relevance", model_descriptor, &[("relevance", &self.relevance)])
    }

    pub fn decode(bytes: &[u8], target: usize, epsilon: f64) -> Result<Self> {
        let b = blob::decode::<F>(bytes)?;
        if b.kind != "relevance" {
            return Err(Error::Corrupt(format!("expected a relevance map, found `{}`", b.kind)));
        }
        let relevance = b
            .get("relevance")
            .cloned()
            .ok_or_else(|| Error::Corrupt("missing `relevance` tensor".into()))?;
        Ok(RelevanceMap {
            relevance,
            target,
            epsilon,
        })
    }

    /// Text record stored next to the blob.
    pub fn sidecar(&self, model_hash: &str) -> String {
        format!(
            "target={}\nepsilon={:e}\nmodel_hash={model_hash}\ntotal={:e}\n",
            self.target,
            self.epsilon,
            self.total()
        )
    }
}

/// Counters collected while propagating.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    /// Neurons whose denominator was exactly zero (only possible with
    /// `epsilon = 0`); their relevance was dropped.
    pub zero_denominators: usize,
}

/// Full propagation result.
#[derive(Debug, Clone)]
pub struct Explanation<F> {
    pub map: RelevanceMap<F>,
    /// `layer_relevance[i]` is the relevance at the input of layer `i`; the
    /// final entry is the initialized output relevance.
    pub layer_relevance: Vec<Tensor<F>>,
    pub diagnostics: Diagnostics,
}

/// One-hot output relevance for `target`.
pub fn init_output_relevance<F: Real>(logits: &Tensor<F>, target: usize, init: OutputInit) -> Result<Tensor<F>> {
    if logits.shape().len() != 1 || target >= logits.len() {
        return Err(Error::InvalidArgument(format!(
            "target {target} out of range for logits {:?}",
            logits.shape()
        )));
    }
    let mut r = Tensor::zeros(logits.shape());
    r.data_mut()[target] = match init {
        OutputInit::Logit => logits.data()[target],
        OutputInit::Unit => F::one(),
    };
    Ok(r)
}

/// `R_j / stabilized(denominator_j)`, or zero for an exactly-zero
/// denominator.
fn ratios<F: Real>(upstream: &[F], denominators: &[F], epsilon: f64, diag: &mut Diagnostics) -> Vec<F> {
    let eps = F::from_f64_lossy(epsilon);
    upstream
        .iter()
        .zip(denominators)
        .map(|(&r, &z)| {
            let sign = if z >= F::zero() { F::one() } else { -F::one() };
            let d = z + eps * sign;
            if d == F::zero() {
                if r != F::zero() {
                    diag.zero_denominators += 1;
                }
                F::zero()
            } else {
                r / d
            }
        })
        .collect()
}

/// Dense rule. `w` has shape `(out, in)`; `denominators` may carry the
/// forward pre-activations when they are already known.
fn dense_rule<F: Real>(
    x: &[F],
    w: &Tensor<F>,
    b: Option<&Tensor<F>>,
    upstream: &[F],
    denominators: Option<&[F]>,
    cfg: &LrpConfig,
    diag: &mut Diagnostics,
) -> Vec<F> {
    let computed;
    let denom = match denominators {
        Some(d) => d,
        None => {
            computed = crate::nn::model::dense_forward(w, b, x);
            &computed
        }
    };
    let s = ratios(upstream, denom, cfg.epsilon, diag);
    let c = dense_transpose(w, &s);
    let mut r: Vec<F> = x.iter().zip(&c).map(|(&xi, &ci)| xi * ci).collect();
    if let (BiasHandling::Distribute, Some(b)) = (cfg.bias, b) {
        let share: F = b.data().iter().zip(&s).map(|(&bj, &sj)| bj * sj).sum::<F>()
            / F::from_usize(x.len()).unwrap();
        for v in &mut r {
            *v += share;
        }
    }
    r
}

/// Relevance of a dense layer's inputs.
pub fn lrp_dense<F: Real>(
    x: &[F],
    w: &Tensor<F>,
    b: Option<&Tensor<F>>,
    upstream: &[F],
    cfg: &LrpConfig,
) -> Result<Vec<F>> {
    if w.shape().len() != 2 || w.shape()[1] != x.len() || w.shape()[0] != upstream.len() {
        return Err(Error::Shape(format!(
            "dense LRP: weight {:?}, input {}, upstream {}",
            w.shape(),
            x.len(),
            upstream.len()
        )));
    }
    if b.is_some_and(|b| b.len() != upstream.len()) {
        return Err(Error::Shape("dense LRP: bias length".into()));
    }
    Ok(dense_rule(x, w, b, upstream, None, cfg, &mut Diagnostics::default()))
}

fn conv_rule<F: Real>(
    geom: &ConvGeom,
    x: &[F],
    w: &Tensor<F>,
    b: Option<&Tensor<F>>,
    upstream: &[F],
    denominators: Option<&[F]>,
    cfg: &LrpConfig,
    diag: &mut Diagnostics,
) -> Vec<F> {
    let computed;
    let denom = match denominators {
        Some(d) => d,
        None => {
            computed = geom.forward(&geom.unroll(x), w.data(), b.map(|b| b.data()));
            &computed
        }
    };
    let s = ratios(upstream, denom, cfg.epsilon, diag);
    let c = geom.backward_data(&s, w.data());
    let mut r: Vec<F> = x.iter().zip(&c).map(|(&xi, &ci)| xi * ci).collect();
    if let (BiasHandling::Distribute, Some(b)) = (cfg.bias, b) {
        // Shares go only to taps that read real input, not padding.
        let patch = geom.patch();
        let valid = geom.unroll(&vec![F::one(); x.len()]);
        let mut cols = vec![F::zero(); geom.positions() * patch];
        for (p, (row, s_row)) in cols.chunks_exact_mut(patch).zip(s.chunks_exact(geom.out_channels)).enumerate() {
            let fan_in: F = (0..patch).map(|c| *valid.get(p, c)).sum();
            let share: F = b.data().iter().zip(s_row).map(|(&bj, &sj)| bj * sj).sum::<F>() / fan_in;
            for (c, v) in row.iter_mut().enumerate() {
                *v = share * *valid.get(p, c);
            }
        }
        geom.col2im(&cols, &mut r);
    }
    r
}

/// Relevance of a convolution's inputs for `layer` (1-D or 2-D) applied to
/// input `x` of shape `in_shape`.
pub fn lrp_conv<F: Real>(
    layer: &LayerSpec,
    in_shape: &[usize],
    x: &[F],
    w: &Tensor<F>,
    b: Option<&Tensor<F>>,
    upstream: &[F],
    cfg: &LrpConfig,
) -> Result<Vec<F>> {
    let out_shape = layer.output_shape(in_shape)?;
    let geom = ConvGeom::of(layer, in_shape, &out_shape)
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a convolution", layer.kind_name())))?;
    let expected_w = layer.param_shapes(in_shape).unwrap().0;
    if w.shape() != expected_w.as_slice()
        || x.len() != in_shape.iter().product::<usize>()
        || upstream.len() != out_shape.iter().product::<usize>()
    {
        return Err(Error::Shape("conv LRP operands do not match the layer".into()));
    }
    Ok(conv_rule(&geom, x, w, b, upstream, None, cfg, &mut Diagnostics::default()))
}

/// Winner-take-all: each pooled output's relevance goes to its argmax input.
pub fn lrp_maxpool<F: Real>(argmax: Option<&[usize]>, upstream: &[F], input_len: usize) -> Result<Vec<F>> {
    let argmax = argmax.ok_or_else(|| Error::Trace("missing pool argmax map".into()))?;
    if argmax.len() != upstream.len() || argmax.iter().any(|&i| i >= input_len) {
        return Err(Error::Shape("argmax map does not match the pooled relevance".into()));
    }
    Ok(scatter_argmax(upstream, argmax, input_len))
}

/// Propagates relevance for `target` from the output back to the input.
pub fn explain<F: Real>(
    model: &Model<F>,
    trace: &ActivationTrace<F>,
    target: usize,
    cfg: &LrpConfig,
) -> Result<RelevanceMap<F>> {
    propagate(model, trace, target, cfg, false).map(|e| e.map)
}

/// Like [`explain`], additionally returning the relevance entering every
/// layer and propagation diagnostics.
pub fn explain_detailed<F: Real>(
    model: &Model<F>,
    trace: &ActivationTrace<F>,
    target: usize,
    cfg: &LrpConfig,
) -> Result<Explanation<F>> {
    propagate(model, trace, target, cfg, true)
}

fn propagate<F: Real>(
    model: &Model<F>,
    trace: &ActivationTrace<F>,
    target: usize,
    cfg: &LrpConfig,
    keep_layers: bool,
) -> Result<Explanation<F>> {
    cfg.validate()?;
    trace.check_matches(model)?;
    let spec = model.spec();
    if trace.is_train_mode() && spec.layers().iter().any(|l| matches!(l, LayerSpec::Dropout { p } if *p > 0.0)) {
        return Err(Error::Trace("trace was recorded with dropout active".into()));
    }
    let init = init_output_relevance(trace.logits(), target, cfg.init)?;
    let mut diag = Diagnostics::default();
    let mut layers = Vec::new();
    let mut r = init.data().to_vec();
    if keep_layers {
        layers.push(init.clone());
    }
    for (i, layer) in spec.layers().iter().enumerate().rev() {
        let in_shape = spec.input_shape_of(i);
        let x = trace.input(i).data();
        let p = &model.params()[i];
        r = match layer {
            LayerSpec::Dense { .. } => dense_rule(
                x,
                p.weight.as_ref().unwrap(),
                p.bias.as_ref(),
                &r,
                Some(trace.output(i).data()),
                cfg,
                &mut diag,
            ),
            LayerSpec::Conv1d { .. } | LayerSpec::Conv2d { .. } => {
                let geom = ConvGeom::of(layer, in_shape, spec.output_shape_of(i)).unwrap();
                conv_rule(
                    &geom,
                    x,
                    p.weight.as_ref().unwrap(),
                    p.bias.as_ref(),
                    &r,
                    Some(trace.output(i).data()),
                    cfg,
                    &mut diag,
                )
            }
            LayerSpec::MaxPool1d { .. } | LayerSpec::MaxPool2d { .. } => {
                lrp_maxpool(trace.pool_argmax(i), &r, x.len())?
            }
            LayerSpec::Relu | LayerSpec::Flatten | LayerSpec::Dropout { .. } => r,
        };
        if keep_layers {
            layers.push(Tensor::new(in_shape.to_vec(), r.clone())?);
        }
    }
    let relevance = Tensor::new(spec.input_shape().to_vec(), r)?;
    relevance.ensure_finite("relevance propagation")?;
    layers.reverse();
    Ok(Explanation {
        map: RelevanceMap {
            relevance,
            target,
            epsilon: cfg.epsilon,
        },
        layer_relevance: layers,
        diagnostics: diag,
    })
}
