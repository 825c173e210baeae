//! Finite-difference gradient oracle shared by the core tests and the
//! acceptance suite.
#![allow(dead_code)]

use audiolrp::nn::{LayerSpec, Mode, Model, ModelSpec};
use audiolrp::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-6;
pub const TOL: f64 = 1e-6;

/// Scalar objective: a fixed random linear functional of the logits.
pub fn objective(model: &Model<f64>, x: &Tensor<f64>, c: &[f64], dropout_seed: Option<u64>) -> f64 {
    let logits = match dropout_seed {
        Some(s) => model.forward(x, Mode::Train(&mut ChaCha8Rng::seed_from_u64(s))).unwrap(),
        None => model.forward(x, Mode::Eval).unwrap(),
    };
    logits.data().iter().zip(c).map(|(z, c)| z * c).sum()
}

pub fn nudge(model: &mut Model<f64>, layer: usize, which: usize, i: usize, delta: f64) {
    let p = &mut model.params_mut()[layer];
    let t = if which == 0 { p.weight.as_mut() } else { p.bias.as_mut() }.unwrap();
    t.data_mut()[i] += delta;
}

pub fn rel_err(a: &[f64], n: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(n).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|v| v * v).sum::<f64>().sqrt().max(n.iter().map(|v| v * v).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Checks every parameter and input gradient of one instance, returning the
/// worst relative error.
pub fn check(spec: ModelSpec, seed: u64, dropout: bool) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Model::<f64>::init(spec.clone(), &mut rng);
    // Non-zero biases so that their gradients are exercised too.
    for p in model.params_mut() {
        if let Some(b) = &mut p.bias {
            b.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
        }
    }
    let x = Tensor::from_fn(spec.input_shape().to_vec(), |_| rng.random_range(-1.0..1.0));
    let c: Vec<f64> = (0..spec.classes()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let dseed = dropout.then_some(seed ^ 0xd0);

    let (_, trace) = match dseed {
        Some(s) => model.forward_traced(&x, Mode::Train(&mut ChaCha8Rng::seed_from_u64(s))).unwrap(),
        None => model.forward_traced(&x, Mode::Eval).unwrap(),
    };
    let back = model.backward(&trace, &Tensor::new(vec![c.len()], c.clone()).unwrap()).unwrap();

    let mut worst: f64 = 0.0;
    let numeric_input: Vec<f64> = (0..x.len())
        .map(|i| {
            let mut p = x.clone();
            p.data_mut()[i] += H;
            let up = objective(&model, &p, &c, dseed);
            p.data_mut()[i] -= 2.0 * H;
            let down = objective(&model, &p, &c, dseed);
            (up - down) / (2.0 * H)
        })
        .collect();
    worst = worst.max(rel_err(back.input.data(), &numeric_input));

    for layer in 0..model.params().len() {
        for which in 0..2 {
            let analytic = {
                let g = &back.params.layers[layer];
                match if which == 0 { &g.weight } else { &g.bias } {
                    Some(t) => t.data().to_vec(),
                    None => continue,
                }
            };
            let mut numeric = Vec::with_capacity(analytic.len());
            for i in 0..analytic.len() {
                nudge(&mut model, layer, which, i, H);
                let up = objective(&model, &x, &c, dseed);
                nudge(&mut model, layer, which, i, -2.0 * H);
                let down = objective(&model, &x, &c, dseed);
                nudge(&mut model, layer, which, i, H);
                numeric.push((up - down) / (2.0 * H));
            }
            worst = worst.max(rel_err(&analytic, &numeric));
        }
    }
    worst
}

pub fn head(classes: usize) -> Vec<LayerSpec> {
    vec![LayerSpec::Flatten, LayerSpec::Dense { units: classes, bias: true }]
}

pub fn instances() -> Vec<(String, ModelSpec, bool)> {
    let mut out = Vec::new();
    let mut push = |name: String, input: Vec<usize>, mut layers: Vec<LayerSpec>, dropout: bool| {
        layers.extend(head(3));
        out.push((name, ModelSpec::new(input, 3, layers).unwrap(), dropout));
    };
    for (k, s, p, bias) in [(3, 1, 1, true), (3, 2, 0, true), (5, 1, 2, false), (1, 1, 0, true), (4, 3, 1, true)] {
        for c_in in [1, 2] {
            push(
                format!("conv1d k{k} s{s} p{p} b{bias} cin{c_in}"),
                vec![11, c_in],
                vec![LayerSpec::Conv1d { kernel: k, stride: s, padding: p, out_channels: 3, bias }],
                false,
            );
        }
    }
    for (k, s, p, bias) in [(3, 1, 1, true), (3, 2, 0, true), (2, 2, 0, false), (5, 2, 2, true), (1, 1, 0, false)] {
        for c_in in [1, 2] {
            push(
                format!("conv2d k{k} s{s} p{p} b{bias} cin{c_in}"),
                vec![7, 6, c_in],
                vec![LayerSpec::Conv2d { kernel: k, stride: s, padding: p, out_channels: 2, bias }],
                false,
            );
        }
    }
    for (k, s) in [(2, 2), (3, 2), (3, 1), (2, 1)] {
        for c in [1, 3] {
            push(format!("maxpool1d k{k} s{s} c{c}"), vec![12, c], vec![LayerSpec::MaxPool1d { kernel: k, stride: s }], false);
            push(format!("maxpool2d k{k} s{s} c{c}"), vec![7, 7, c], vec![LayerSpec::MaxPool2d { kernel: k, stride: s }], false);
        }
    }
    for units in [1, 4, 9] {
        for bias in [true, false] {
            push(
                format!("dense u{units} b{bias}"),
                vec![6],
                vec![LayerSpec::Dense { units, bias }],
                false,
            );
        }
    }
    for len in [5, 13] {
        push(
            format!("relu len{len}"),
            vec![len, 2],
            vec![LayerSpec::Conv1d { kernel: 3, stride: 1, padding: 1, out_channels: 4, bias: true }, LayerSpec::Relu],
            false,
        );
        push(format!("flatten len{len}"), vec![len, 3], vec![LayerSpec::Flatten], false);
    }
    for p in [0.25, 0.5] {
        for train in [false, true] {
            push(
                format!("dropout p{p} train{train}"),
                vec![10],
                vec![LayerSpec::Dense { units: 8, bias: true }, LayerSpec::Relu, LayerSpec::Dropout { p }],
                train,
            );
        }
    }
    push(
        "stack conv1d relu pool".into(),
        vec![16, 1],
        vec![
            LayerSpec::Conv1d { kernel: 3, stride: 1, padding: 1, out_channels: 4, bias: true },
            LayerSpec::Relu,
            LayerSpec::MaxPool1d { kernel: 2, stride: 2 },
            LayerSpec::Conv1d { kernel: 3, stride: 1, padding: 1, out_channels: 3, bias: true },
            LayerSpec::Relu,
            LayerSpec::MaxPool1d { kernel: 2, stride: 2 },
        ],
        false,
    );
    push(
        "stack conv2d relu pool".into(),
        vec![11, 11, 1],
        vec![
            LayerSpec::Conv2d { kernel: 3, stride: 2, padding: 0, out_channels: 3, bias: true },
            LayerSpec::Relu,
            LayerSpec::MaxPool2d { kernel: 3, stride: 2 },
            LayerSpec::Conv2d { kernel: 1, stride: 1, padding: 0, out_channels: 2, bias: true },
        ],
        false,
    );
    out
}

