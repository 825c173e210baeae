//! Declarative architecture descriptions and the two reference presets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One layer of a sequential network.
///
/// Tensors flowing between layers are channels-last: `(length, channels)`
/// for 1-D signals and `(height, width, channels)` for 2-D inputs.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Conv1d {
        kernel: usize,
        stride: usize,
        padding: usize,
        out_channels: usize,
        bias: bool,
    },
    Conv2d {
        kernel: usize,
        stride: usize,
        padding: usize,
        out_channels: usize,
        bias: bool,
    },
    MaxPool1d {
        kernel: usize,
        stride: usize,
    },
    MaxPool2d {
        kernel: usize,
        stride: usize,
    },
    Dense {
        units: usize,
        bias: bool,
    },
    Relu,
    Flatten,
    Dropout {
        p: f64,
    },
}

impl LayerSpec {
    pub fn has_weights(&self) -> bool {
        matches!(
            self,
            LayerSpec::Conv1d { .. } | LayerSpec::Conv2d { .. } | LayerSpec::Dense { .. }
        )
    }

    pub fn has_bias(&self) -> bool {
        match self {
            LayerSpec::Conv1d { bias, .. }
            | LayerSpec::Conv2d { bias, .. }
            | LayerSpec::Dense { bias, .. } => *bias,
            _ => false,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::MaxPool1d { .. } => "maxpool1d",
            LayerSpec::MaxPool2d { .. } => "maxpool2d",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Relu => "relu",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dropout { .. } => "dropout",
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("{}: {what}", self.kind_name())));
        match *self {
            LayerSpec::Conv1d {
                kernel,
                stride,
                out_channels,
                ..
            }
            | LayerSpec::Conv2d {
                kernel,
                stride,
                out_channels,
                ..
            } => {
                if kernel == 0 {
                    return bad("kernel extent must be >= 1");
                }
                if stride == 0 {
                    return bad("stride must be >= 1");
                }
                if out_channels == 0 {
                    return bad("output channels must be >= 1");
                }
            }
            LayerSpec::MaxPool1d { kernel, stride } | LayerSpec::MaxPool2d { kernel, stride } => {
                if kernel == 0 || stride == 0 {
                    return bad("kernel and stride must be >= 1");
                }
            }
            LayerSpec::Dense { units, .. } => {
                if units == 0 {
                    return bad("units must be >= 1");
                }
            }
            LayerSpec::Dropout { p } => {
                if !(0.0..1.0).contains(&p) {
                    return bad("dropout probability must lie in [0, 1)");
                }
            }
            LayerSpec::Relu | LayerSpec::Flatten => {}
        }
        Ok(())
    }

    /// Output shape for the given input shape, or a construction error.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.validate()?;
        let mismatch = |expect: &str| {
            Err(Error::Shape(format!(
                "{} expects {expect} input, got {input:?}",
                self.kind_name()
            )))
        };
        let window = |extent: usize, kernel: usize, stride: usize, pad: usize| {
            let padded = extent + 2 * pad;
            (padded >= kernel).then(|| (padded - kernel) / stride + 1)
        };
        match *self {
            LayerSpec::Conv1d {
                kernel,
                stride,
                padding,
                out_channels,
                ..
            } => {
                let [len, _] = input else {
                    return mismatch("(length, channels)");
                };
                match window(*len, kernel, stride, padding) {
                    Some(out) => Ok(vec![out, out_channels]),
                    None => mismatch("length >= kernel"),
                }
            }
            LayerSpec::Conv2d {
                kernel,
                stride,
                padding,
                out_channels,
                ..
            } => {
                let [h, w, _] = input else {
                    return mismatch("(height, width, channels)");
                };
                match (
                    window(*h, kernel, stride, padding),
                    window(*w, kernel, stride, padding),
                ) {
                    (Some(oh), Some(ow)) => Ok(vec![oh, ow, out_channels]),
                    _ => mismatch("extent >= kernel"),
                }
            }
            LayerSpec::MaxPool1d { kernel, stride } => {
                let [len, c] = input else {
                    return mismatch("(length, channels)");
                };
                match window(*len, kernel, stride, 0) {
                    Some(out) => Ok(vec![out, *c]),
                    None => mismatch("length >= kernel"),
                }
            }
            LayerSpec::MaxPool2d { kernel, stride } => {
                let [h, w, c] = input else {
                    return mismatch("(height, width, channels)");
                };
                match (window(*h, kernel, stride, 0), window(*w, kernel, stride, 0)) {
                    (Some(oh), Some(ow)) => Ok(vec![oh, ow, *c]),
                    _ => mismatch("extent >= kernel"),
                }
            }
            LayerSpec::Dense { units, .. } => {
                if input.len() != 1 {
                    return mismatch("flat");
                }
                Ok(vec![units])
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Relu | LayerSpec::Dropout { .. } => Ok(input.to_vec()),
        }
    }

    /// Weight and bias shapes for a layer receiving `input`.
    pub fn param_shapes(&self, input: &[usize]) -> Option<(Vec<usize>, Vec<usize>)> {
        match *self {
            LayerSpec::Conv1d {
                kernel,
                out_channels,
                ..
            } => Some((vec![out_channels, input[1], kernel], vec![out_channels])),
            LayerSpec::Conv2d {
                kernel,
                out_channels,
                ..
            } => Some((
                vec![out_channels, input[2], kernel, kernel],
                vec![out_channels],
            )),
            LayerSpec::Dense { units, .. } => Some((vec![units, input[0]], vec![units])),
            _ => None,
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = |bias: bool| if bias { 1 } else { 0 };
        match *self {
            LayerSpec::Conv1d {
                kernel,
                stride,
                padding,
                out_channels,
                bias,
            } => write!(
                f,
                "conv1d(k={kernel},s={stride},p={padding},c={out_channels},b={})",
                b(bias)
            ),
            LayerSpec::Conv2d {
                kernel,
                stride,
                padding,
                out_channels,
                bias,
            } => write!(
                f,
                "conv2d(k={kernel},s={stride},p={padding},c={out_channels},b={})",
                b(bias)
            ),
            LayerSpec::MaxPool1d { kernel, stride } => write!(f, "maxpool1d(k={kernel},s={stride})"),
            LayerSpec::MaxPool2d { kernel, stride } => write!(f, "maxpool2d(k={kernel},s={stride})"),
            LayerSpec::Dense { units, bias } => write!(f, "dense(u={units},b={})", b(bias)),
            LayerSpec::Relu => f.write_str("relu"),
            LayerSpec::Flatten => f.write_str("flatten"),
            LayerSpec::Dropout { p } => write!(f, "dropout(p={p})"),
        }
    }
}

impl FromStr for LayerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Corrupt(format!("unparseable layer descriptor `{s}`"));
        let (name, args) = match s.find('(') {
            Some(open) => {
                let inner = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
                (&s[..open], inner)
            }
            None => (s, ""),
        };
        let mut kv = std::collections::HashMap::new();
        for part in args.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            kv.insert(k, v);
        }
        let num = |key: &str| -> Result<usize> {
            kv.get(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(bad)
        };
        let flag = |key: &str| -> Result<bool> { Ok(num(key)? != 0) };
        Ok(match name {
            "conv1d" => LayerSpec::Conv1d {
                kernel: num("k")?,
                stride: num("s")?,
                padding: num("p")?,
                out_channels: num("c")?,
                bias: flag("b")?,
            },
            "conv2d" => LayerSpec::Conv2d {
                kernel: num("k")?,
                stride: num("s")?,
                padding: num("p")?,
                out_channels: num("c")?,
                bias: flag("b")?,
            },
            "maxpool1d" => LayerSpec::MaxPool1d {
                kernel: num("k")?,
                stride: num("s")?,
            },
            "maxpool2d" => LayerSpec::MaxPool2d {
                kernel: num("k")?,
                stride: num("s")?,
            },
            "dense" => LayerSpec::Dense {
                units: num("u")?,
                bias: flag("b")?,
            },
            "relu" => LayerSpec::Relu,
            "flatten" => LayerSpec::Flatten,
            "dropout" => LayerSpec::Dropout {
                p: kv.get("p").and_then(|v| v.parse().ok()).ok_or_else(bad)?,
            },
            _ => return Err(bad()),
        })
    }
}

/// A validated sequential architecture: every layer's input shape chains
/// from the previous layer's output, and the last layer emits one logit per
/// class.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    input_shape: Vec<usize>,
    classes: usize,
    layers: Vec<LayerSpec>,
    shapes: Vec<Vec<usize>>,
}

impl ModelSpec {
    pub fn new(input_shape: Vec<usize>, classes: usize, layers: Vec<LayerSpec>) -> Result<Self> {
        if input_shape.is_empty() || input_shape.contains(&0) {
            return Err(Error::Config(format!("invalid input shape {input_shape:?}")));
        }
        if classes == 0 {
            return Err(Error::Config("class count must be >= 1".into()));
        }
        let mut shapes = vec![input_shape.clone()];
        for (i, layer) in layers.iter().enumerate() {
            let next = layer
                .output_shape(shapes.last().unwrap())
                .map_err(|e| Error::Config(format!("layer {i}: {e}")))?;
            shapes.push(next);
        }
        if shapes.last().unwrap() != &vec![classes] {
            return Err(Error::Config(format!(
                "network output {:?} does not match {classes} classes",
                shapes.last().unwrap()
            )));
        }
        Ok(ModelSpec {
            input_shape,
            classes,
            layers,
            shapes,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_shape_of(&self, layer: usize) -> &[usize] {
        &self.shapes[layer]
    }

    pub fn output_shape_of(&self, layer: usize) -> &[usize] {
        &self.shapes[layer + 1]
    }

    /// Layers that either carry weights or pool; activations, reshapes and
    /// dropout are not counted.
    pub fn weight_and_pool_layers(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| {
                l.has_weights()
                    || matches!(l, LayerSpec::MaxPool1d { .. } | LayerSpec::MaxPool2d { .. })
            })
            .count()
    }

    /// True when the input is a 1-D signal rather than a 2-D image.
    pub fn takes_waveform(&self) -> bool {
        self.input_shape.len() == 2
    }

    /// Canonical single-line description, stored in checkpoints.
    pub fn descriptor(&self) -> String {
        let dims: Vec<String> = self.input_shape.iter().map(|d| d.to_string()).collect();
        let layers: Vec<String> = self.layers.iter().map(|l| l.to_string()).collect();
        format!(
            "in={};classes={}|{}",
            dims.join("x"),
            self.classes,
            layers.join(";")
        )
    }

    pub fn from_descriptor(desc: &str) -> Result<Self> {
        let bad = || Error::Corrupt(format!("unparseable architecture descriptor `{desc}`"));
        let (head, body) = desc.split_once('|').ok_or_else(bad)?;
        let (input, classes) = head.split_once(';').ok_or_else(bad)?;
        let input_shape = input
            .strip_prefix("in=")
            .ok_or_else(bad)?
            .split('x')
            .map(|d| d.parse::<usize>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let classes = classes
            .strip_prefix("classes=")
            .and_then(|c| c.parse().ok())
            .ok_or_else(bad)?;
        let layers = body
            .split(';')
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<LayerSpec>>>()?;
        ModelSpec::new(input_shape, classes, layers).map_err(|e| Error::Corrupt(e.to_string()))
    }
}

/// Which weight layers carry a bias term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiasMode {
    All,
    /// Every layer but the first weight layer. Zero input samples then
    /// receive exactly zero relevance.
    NoFirst,
    None,
}

/// Knobs shared by the architecture presets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArchOptions {
    /// Multiplier on every channel and hidden-unit count; topology unchanged.
    pub width: f64,
    pub bias: BiasMode,
    /// Dropout probability after the hidden dense layers (AlexNet variant).
    pub dropout: f64,
}

impl Default for ArchOptions {
    fn default() -> Self {
        ArchOptions {
            width: 1.0,
            bias: BiasMode::All,
            dropout: 0.5,
        }
    }
}

impl ArchOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::Config(format!("width must be positive, got {}", self.width)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        Ok(())
    }

    fn scale(&self, n: usize) -> usize {
        ((n as f64 * self.width).round() as usize).max(1)
    }
}

pub const AUDIONET_INPUT_LEN: usize = 8000;
pub const ALEXNET_INPUT_SIDE: usize = 227;

/// Raw-waveform network: six conv3/maxpool2 stages, then FC-1024, FC-512
/// and the classifier.
pub fn build_audionet(classes: usize) -> ModelSpec {
    audionet_with(classes, &ArchOptions::default()).expect("AudioNet preset is consistent")
}

pub fn audionet_with(classes: usize, opts: &ArchOptions) -> Result<ModelSpec> {
    opts.validate()?;
    let mut layers = Vec::new();
    for (i, ch) in [100, 64, 128, 128, 128, 128].into_iter().enumerate() {
        layers.push(LayerSpec::Conv1d {
            kernel: 3,
            stride: 1,
            padding: 1,
            out_channels: opts.scale(ch),
            bias: bias_for(opts.bias, i == 0),
        });
        layers.push(LayerSpec::Relu);
        layers.push(LayerSpec::MaxPool1d {
            kernel: 2,
            stride: 2,
        });
    }
    layers.push(LayerSpec::Flatten);
    for units in [1024, 512] {
        layers.push(LayerSpec::Dense {
            units: opts.scale(units),
            bias: bias_for(opts.bias, false),
        });
        layers.push(LayerSpec::Relu);
    }
    layers.push(LayerSpec::Dense {
        units: classes,
        bias: bias_for(opts.bias, false),
    });
    ModelSpec::new(vec![AUDIONET_INPUT_LEN, 1], classes, layers)
}

/// AlexNet-style spectrogram network without normalization layers, with a
/// single input channel and FC-1024, FC-1024, FC-classes.
pub fn build_alexnet_variant(classes: usize) -> ModelSpec {
    alexnet_variant_with(classes, &ArchOptions::default()).expect("AlexNet preset is consistent")
}

pub fn alexnet_variant_with(classes: usize, opts: &ArchOptions) -> Result<ModelSpec> {
    opts.validate()?;
    let conv = |kernel, stride, padding, ch: usize, first| LayerSpec::Conv2d {
        kernel,
        stride,
        padding,
        out_channels: opts.scale(ch),
        bias: bias_for(opts.bias, first),
    };
    let pool = LayerSpec::MaxPool2d {
        kernel: 3,
        stride: 2,
    };
    let mut layers = vec![
        conv(11, 4, 0, 96, true),
        LayerSpec::Relu,
        pool.clone(),
        conv(5, 1, 2, 256, false),
        LayerSpec::Relu,
        pool.clone(),
        conv(3, 1, 1, 384, false),
        LayerSpec::Relu,
        conv(3, 1, 1, 384, false),
        LayerSpec::Relu,
        conv(3, 1, 1, 256, false),
        LayerSpec::Relu,
        pool,
        LayerSpec::Flatten,
    ];
    for _ in 0..2 {
        layers.push(LayerSpec::Dense {
            units: opts.scale(1024),
            bias: bias_for(opts.bias, false),
        });
        layers.push(LayerSpec::Relu);
        if opts.dropout > 0.0 {
            layers.push(LayerSpec::Dropout { p: opts.dropout });
        }
    }
    layers.push(LayerSpec::Dense {
        units: classes,
        bias: bias_for(opts.bias, false),
    });
    ModelSpec::new(
        vec![ALEXNET_INPUT_SIDE, ALEXNET_INPUT_SIDE, 1],
        classes,
        layers,
    )
}

fn bias_for(mode: BiasMode, first: bool) -> bool {
    match mode {
        BiasMode::All => true,
        BiasMode::NoFirst => !first,
        BiasMode::None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flatten_width(spec: &ModelSpec) -> usize {
        let i = spec
            .layers()
            .iter()
            .position(|l| *l == LayerSpec::Flatten)
            .unwrap();
        spec.output_shape_of(i)[0]
    }

    #[test]
    fn audionet_layer_sequence() {
        let spec = build_audionet(10);
        assert_eq!(spec.weight_and_pool_layers(), 15);
        assert_eq!(flatten_width(&spec), 16000);
        let i = spec
            .layers()
            .iter()
            .position(|l| *l == LayerSpec::Flatten)
            .unwrap();
        assert_eq!(spec.input_shape_of(i), &[125, 128]);
        assert_eq!(
            spec.layers().last(),
            Some(&LayerSpec::Dense {
                units: 10,
                bias: true
            })
        );
        assert_eq!(build_audionet(2).output_shape_of(spec.layers().len() - 1), &[2]);
    }

    #[test]
    fn alexnet_variant_shapes() {
        let spec = build_alexnet_variant(2);
        assert_eq!(flatten_width(&spec), 6 * 6 * 256);
        let i = spec
            .layers()
            .iter()
            .position(|l| *l == LayerSpec::Flatten)
            .unwrap();
        assert_eq!(spec.input_shape_of(i), &[6, 6, 256]);
        // conv1 11/4 on 227 gives 55, pools floor to 27, 13, 6
        assert_eq!(spec.output_shape_of(0), &[55, 55, 96]);
        assert_eq!(spec.output_shape_of(2), &[27, 27, 96]);
        assert_eq!(spec.output_shape_of(5), &[13, 13, 256]);
        let dense: Vec<usize> = spec
            .layers()
            .iter()
            .filter_map(|l| match l {
                LayerSpec::Dense { units, .. } => Some(*units),
                _ => None,
            })
            .collect();
        assert_eq!(dense, vec![1024, 1024, 2]);
        assert_eq!(spec.input_shape(), &[227, 227, 1]);
    }

    #[test]
    fn dense_without_flatten_is_a_construction_error() {
        let err = ModelSpec::new(
            vec![4, 2],
            3,
            vec![LayerSpec::Dense {
                units: 3,
                bias: true,
            }],
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn invalid_layer_parameters_are_rejected() {
        let conv = |kernel, stride, out_channels| {
            ModelSpec::new(
                vec![8, 1],
                1,
                vec![
                    LayerSpec::Conv1d {
                        kernel,
                        stride,
                        padding: 0,
                        out_channels,
                        bias: true,
                    },
                    LayerSpec::Flatten,
                    LayerSpec::Dense {
                        units: 1,
                        bias: true,
                    },
                ],
            )
        };
        assert!(conv(3, 1, 2).is_ok());
        assert!(conv(0, 1, 2).is_err());
        assert!(conv(3, 0, 2).is_err());
        assert!(conv(3, 1, 0).is_err());
    }

    #[test]
    fn descriptor_round_trips() {
        for spec in [
            build_audionet(10),
            alexnet_variant_with(
                2,
                &ArchOptions {
                    width: 0.25,
                    bias: BiasMode::NoFirst,
                    dropout: 0.3,
                },
            )
            .unwrap(),
        ] {
            let parsed = ModelSpec::from_descriptor(&spec.descriptor()).unwrap();
            assert_eq!(parsed, spec);
        }
        assert!(ModelSpec::from_descriptor("in=8;classes=2|bogus").is_err());
    }

    #[test]
    fn width_scale_keeps_topology() {
        let spec = audionet_with(
            10,
            &ArchOptions {
                width: 0.25,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(spec.weight_and_pool_layers(), 15);
        assert_eq!(flatten_width(&spec), 125 * 32);
    }
}
