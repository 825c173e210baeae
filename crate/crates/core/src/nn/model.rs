use rand::Rng;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::tensor::{axpy, dot, Real, Tensor};

use super::kernels::{scatter_argmax, ConvGeom, PoolGeom};
use super::spec::{LayerSpec, ModelSpec};

/// Learned parameters of one layer. Parameter-free layers hold `None`s.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<F> {
    pub weight: Option<Tensor<F>>,
    pub bias: Option<Tensor<F>>,
}

/// One tensor per parameter, laid out like [`Model::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<F> {
    pub layers: Vec<LayerParams<F>>,
}

impl<F: Real> Gradients<F> {
    pub fn zeros_like(model: &Model<F>) -> Self {
        Gradients {
            layers: model
                .params
                .iter()
                .map(|p| LayerParams {
                    weight: p.weight.as_ref().map(|w| Tensor::zeros(w.shape())),
                    bias: p.bias.as_ref().map(|b| Tensor::zeros(b.shape())),
                })
                .collect(),
        }
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor<F>> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()))
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor<F>> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
    }

    /// `self += other`, elementwise.
    pub fn add_assign(&mut self, other: &Gradients<F>) {
        for (a, b) in self.tensors_mut().zip(other.tensors()) {
            for (x, &y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: F) {
        for t in self.tensors_mut() {
            for x in t.data_mut() {
                *x *= factor;
            }
        }
    }

    /// Euclidean norm over every parameter gradient.
    pub fn l2_norm(&self) -> f64 {
        self.tensors()
            .flat_map(|t| t.data().iter())
            .map(|v| v.as_f64() * v.as_f64())
            .sum::<f64>()
            .sqrt()
    }
}

/// Per-layer record of one forward pass.
#[derive(Debug, Clone)]
pub struct ActivationTrace<F> {
    /// `activations[i]` is the input of layer `i`; the last entry is the
    /// network output.
    activations: Vec<Tensor<F>>,
    /// Flat input index of each pooled maximum, for pooling layers.
    pool_argmax: Vec<Option<Vec<usize>>>,
    /// Inverted-dropout multipliers, for dropout layers in training mode.
    dropout_masks: Vec<Option<Vec<F>>>,
    train_mode: bool,
}

impl<F: Real> ActivationTrace<F> {
    pub fn layer_count(&self) -> usize {
        self.activations.len() - 1
    }

    pub fn input(&self, layer: usize) -> &Tensor<F> {
        &self.activations[layer]
    }

    pub fn output(&self, layer: usize) -> &Tensor<F> {
        &self.activations[layer + 1]
    }

    pub fn logits(&self) -> &Tensor<F> {
        self.activations.last().unwrap()
    }

    pub fn pool_argmax(&self, layer: usize) -> Option<&[usize]> {
        self.pool_argmax.get(layer)?.as_deref()
    }

    pub fn is_train_mode(&self) -> bool {
        self.train_mode
    }

    /// Checks that this trace could have come from `model`.
    pub fn check_matches(&self, model: &Model<F>) -> Result<()> {
        let spec = model.spec();
        if self.layer_count() != spec.layers().len() {
            return Err(Error::Trace(format!(
                "trace has {} layers, model has {}",
                self.layer_count(),
                spec.layers().len()
            )));
        }
        for (i, act) in self.activations.iter().enumerate() {
            if act.shape() != spec.input_shape_of(i) {
                return Err(Error::Trace(format!(
                    "activation {i} has shape {:?}, model expects {:?}",
                    act.shape(),
                    spec.input_shape_of(i)
                )));
            }
        }
        for (i, layer) in spec.layers().iter().enumerate() {
            let is_pool = matches!(layer, LayerSpec::MaxPool1d { .. } | LayerSpec::MaxPool2d { .. });
            if is_pool && self.pool_argmax[i].is_none() {
                return Err(Error::Trace(format!("layer {i}: missing pool argmax map")));
            }
        }
        Ok(())
    }
}

/// Whether a forward pass runs in training mode (dropout active).
pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn RngCore),
}

/// A network: architecture plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<F> {
    spec: ModelSpec,
    params: Vec<LayerParams<F>>,
}

/// Input gradient plus parameter gradients of one backward pass.
#[derive(Debug, Clone)]
pub struct Backward<F> {
    pub params: Gradients<F>,
    pub input: Tensor<F>,
}

impl<F: Real> Model<F> {
    /// Kaiming-uniform fan-in initialization for weights; zero biases.
    pub fn init(spec: ModelSpec, rng: &mut impl Rng) -> Self {
        let params = spec
            .layers()
            .iter()
            .enumerate()
            .map(|(i, layer)| match layer.param_shapes(spec.input_shape_of(i)) {
                Some((w, b)) => {
                    let fan_in: usize = w[1..].iter().product();
                    let bound = (6.0 / fan_in as f64).sqrt();
                    LayerParams {
                        weight: Some(Tensor::from_fn(w, |_| {
                            F::from_f64_lossy(rng.random_range(-bound..bound))
                        })),
                        bias: layer.has_bias().then(|| Tensor::zeros(b)),
                    }
                }
                None => LayerParams {
                    weight: None,
                    bias: None,
                },
            })
            .collect();
        Model { spec, params }
    }

    /// Assembles a model from explicit parameters, checking every shape.
    pub fn from_params(spec: ModelSpec, params: Vec<LayerParams<F>>) -> Result<Self> {
        if params.len() != spec.layers().len() {
            return Err(Error::Shape(format!(
                "{} parameter sets for {} layers",
                params.len(),
                spec.layers().len()
            )));
        }
        for (i, (layer, p)) in spec.layers().iter().zip(&params).enumerate() {
            let expected = layer.param_shapes(spec.input_shape_of(i));
            let check = |t: &Option<Tensor<F>>, want: Option<&Vec<usize>>, what: &str| match (t, want) {
                (None, None) => Ok(()),
                (Some(t), Some(w)) if t.shape() == w.as_slice() => Ok(()),
                _ => Err(Error::Shape(format!(
                    "layer {i} {what}: got {:?}, expected {want:?}",
                    t.as_ref().map(|t| t.shape().to_vec())
                ))),
            };
            check(&p.weight, expected.as_ref().map(|e| &e.0), "weight")?;
            let bias_shape = expected.as_ref().filter(|_| layer.has_bias()).map(|e| &e.1);
            check(&p.bias, bias_shape, "bias")?;
        }
        Ok(Model { spec, params })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &[LayerParams<F>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [LayerParams<F>] {
        &mut self.params
    }

    /// `(name, tensor)` for every parameter, in layer order.
    pub fn named_params(&self) -> Vec<(String, &Tensor<F>)> {
        let mut out = Vec::new();
        for (i, p) in self.params.iter().enumerate() {
            if let Some(w) = &p.weight {
                out.push((format!("layer{i}.weight"), w));
            }
            if let Some(b) = &p.bias {
                out.push((format!("layer{i}.bias"), b));
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.len()).sum()
    }

    fn check_input(&self, input: &Tensor<F>) -> Result<()> {
        if input.shape() != self.spec.input_shape() {
            return Err(Error::Shape(format!(
                "model expects input {:?}, got {:?}",
                self.spec.input_shape(),
                input.shape()
            )));
        }
        Ok(())
    }

    /// Forward pass returning the logits only.
    pub fn forward(&self, input: &Tensor<F>, mode: Mode<'_>) -> Result<Tensor<F>> {
        self.run(input, mode, false).map(|(logits, _)| logits)
    }

    /// Forward pass that also records the activation trace used by
    /// backpropagation and relevance propagation.
    pub fn forward_traced(
        &self,
        input: &Tensor<F>,
        mode: Mode<'_>,
    ) -> Result<(Tensor<F>, ActivationTrace<F>)> {
        self.run(input, mode, true)
            .map(|(logits, trace)| (logits, trace.expect("trace requested")))
    }

    fn run(
        &self,
        input: &Tensor<F>,
        mut mode: Mode<'_>,
        record: bool,
    ) -> Result<(Tensor<F>, Option<ActivationTrace<F>>)> {
        self.check_input(input)?;
        let n = self.spec.layers().len();
        let train_mode = matches!(mode, Mode::Train(_));
        let mut activations = Vec::with_capacity(if record { n + 1 } else { 0 });
        let mut pool_argmax = Vec::with_capacity(n);
        let mut dropout_masks = Vec::with_capacity(n);
        let mut current = input.clone();

        for (i, layer) in self.spec.layers().iter().enumerate() {
            let in_shape = self.spec.input_shape_of(i);
            let out_shape = self.spec.output_shape_of(i).to_vec();
            let params = &self.params[i];
            let mut argmax = None;
            let mut mask = None;
            let next = match layer {
                LayerSpec::Conv1d { .. } | LayerSpec::Conv2d { .. } => {
                    let geom = ConvGeom::of(layer, in_shape, &out_shape).unwrap();
                    let cols = geom.unroll(current.data());
                    let out = geom.forward(
                        &cols,
                        params.weight.as_ref().unwrap().data(),
                        params.bias.as_ref().map(|b| b.data()),
                    );
                    Tensor::new(out_shape, out)?
                }
                LayerSpec::Dense { .. } => {
                    let w = params.weight.as_ref().unwrap();
                    let out = dense_forward(w, params.bias.as_ref(), current.data());
                    Tensor::new(out_shape, out)?
                }
                LayerSpec::MaxPool1d { .. } | LayerSpec::MaxPool2d { .. } => {
                    let geom = PoolGeom::of(layer, in_shape, &out_shape).unwrap();
                    let (out, arg) = geom.forward(current.data());
                    argmax = Some(arg);
                    Tensor::new(out_shape, out)?
                }
                LayerSpec::Relu => current.map(|v| if v > F::zero() { v } else { F::zero() }),
                LayerSpec::Flatten => current.clone().reshape(out_shape)?,
                LayerSpec::Dropout { p } => match &mut mode {
                    Mode::Train(rng) if *p > 0.0 => {
                        let keep = F::from_f64_lossy(1.0 / (1.0 - p));
                        let m: Vec<F> = (0..current.len())
                            .map(|_| if rng.random::<f64>() < *p { F::zero() } else { keep })
                            .collect();
                        let out = current.data().iter().zip(&m).map(|(&x, &k)| x * k).collect();
                        mask = Some(m);
                        Tensor::new(out_shape, out)?
                    }
                    _ => current.clone(),
                },
            };
            if layer.has_weights() {
                next.ensure_finite(&format!("layer {i} ({})", layer.kind_name()))?;
            }
            if record {
                activations.push(std::mem::replace(&mut current, next));
                pool_argmax.push(argmax);
                dropout_masks.push(mask);
            } else {
                current = next;
            }
        }

        let trace = record.then(|| {
            activations.push(current.clone());
            ActivationTrace {
                activations,
                pool_argmax,
                dropout_masks,
                train_mode,
            }
        });
        Ok((current, trace))
    }

    /// Gradients of a scalar objective with respect to every parameter and
    /// the input, given the objective's gradient at the logits.
    pub fn backward(&self, trace: &ActivationTrace<F>, logit_grad: &Tensor<F>) -> Result<Backward<F>> {
        let mut params = Gradients::zeros_like(self);
        let input = self.backward_into(trace, logit_grad, &mut params, true)?;
        Ok(Backward {
            params,
            input: input.expect("input gradient requested"),
        })
    }

    /// Adds this example's parameter gradients into `grads`. The input
    /// gradient is only formed when `want_input` is set.
    pub fn backward_into(
        &self,
        trace: &ActivationTrace<F>,
        logit_grad: &Tensor<F>,
        grads: &mut Gradients<F>,
        want_input: bool,
    ) -> Result<Option<Tensor<F>>> {
        trace.check_matches(self)?;
        if logit_grad.shape() != trace.logits().shape() {
            return Err(Error::Shape(format!(
                "logit gradient {:?} vs logits {:?}",
                logit_grad.shape(),
                trace.logits().shape()
            )));
        }
        let mut upstream = logit_grad.data().to_vec();
        for (i, layer) in self.spec.layers().iter().enumerate().rev() {
            let in_shape = self.spec.input_shape_of(i);
            let x = trace.input(i);
            let params = &self.params[i];
            let need_dx = want_input || i > 0;
            upstream = match layer {
                LayerSpec::Conv1d { .. } | LayerSpec::Conv2d { .. } => {
                    let geom = ConvGeom::of(layer, in_shape, self.spec.output_shape_of(i)).unwrap();
                    let cols = geom.unroll(x.data());
                    let g = &mut grads.layers[i];
                    geom.backward_params(
                        &upstream,
                        &cols,
                        g.weight.as_mut().unwrap().data_mut(),
                        g.bias.as_mut().map(|b| b.data_mut()),
                    );
                    if need_dx {
                        geom.backward_data(&upstream, params.weight.as_ref().unwrap().data())
                    } else {
                        Vec::new()
                    }
                }
                LayerSpec::Dense { .. } => {
                    let w = params.weight.as_ref().unwrap();
                    let (out_n, in_n) = (w.shape()[0], w.shape()[1]);
                    let g = &mut grads.layers[i];
                    // dW += dy · xᵀ
                    let dw = g.weight.as_mut().unwrap().data_mut();
                    for (row, &dy) in dw.chunks_exact_mut(in_n).zip(&upstream[..out_n]) {
                        if dy != F::zero() {
                            axpy(dy, x.data(), row);
                        }
                    }
                    if let Some(db) = g.bias.as_mut() {
                        for (d, &u) in db.data_mut().iter_mut().zip(&upstream) {
                            *d += u;
                        }
                    }
                    if need_dx {
                        dense_transpose(w, &upstream)
                    } else {
                        Vec::new()
                    }
                }
                LayerSpec::MaxPool1d { .. } | LayerSpec::MaxPool2d { .. } => {
                    let argmax = trace.pool_argmax(i).unwrap();
                    scatter_argmax(&upstream, argmax, x.len())
                }
                LayerSpec::Relu => upstream
                    .iter()
                    .zip(x.data())
                    .map(|(&g, &v)| if v > F::zero() { g } else { F::zero() })
                    .collect(),
                LayerSpec::Flatten => upstream,
                LayerSpec::Dropout { .. } => match &trace.dropout_masks[i] {
                    Some(mask) => upstream.iter().zip(mask).map(|(&g, &m)| g * m).collect(),
                    None => upstream,
                },
            };
        }
        if !want_input {
            return Ok(None);
        }
        Tensor::new(self.spec.input_shape().to_vec(), upstream).map(Some)
    }
}

/// `W·x + b` for a `(out, in)` weight matrix.
pub(crate) fn dense_forward<F: Real>(w: &Tensor<F>, b: Option<&Tensor<F>>, x: &[F]) -> Vec<F> {
    let in_n = w.shape()[1];
    w.data()
        .chunks_exact(in_n)
        .enumerate()
        .map(|(j, row)| dot(row, x) + b.map_or(F::zero(), |b| b.data()[j]))
        .collect()
}

/// `Wᵀ·v` for a `(out, in)` weight matrix.
pub(crate) fn dense_transpose<F: Real>(w: &Tensor<F>, v: &[F]) -> Vec<F> {
    let in_n = w.shape()[1];
    let mut out = vec![F::zero(); in_n];
    for (row, &vj) in w.data().chunks_exact(in_n).zip(v) {
        if vj != F::zero() {
            axpy(vj, row, &mut out);
        }
    }
    out
}
