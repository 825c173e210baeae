use std::path::Path;

use crate::blob;
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

use super::model::{LayerParams, Model};
use super::spec::ModelSpec;

const KIND: &str = "checkpoint";
const AUX_PREFIX: &str = "aux.";

/// A loaded model plus auxiliary tensors stored next to its parameters
/// (e.g. the input normalization mean).
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<F> {
    pub model: Model<F>,
    pub aux: Vec<(String, Tensor<F>)>,
}

impl<F: Real> Checkpoint<F> {
    pub fn aux(&self, name: &str) -> Option<&Tensor<F>> {
        self.aux.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

pub fn encode_checkpoint<F: Real>(model: &Model<F>, aux: &[(&str, &Tensor<F>)]) -> Vec<u8> {
    let named = model.named_params();
    let aux_names: Vec<String> = aux.iter().map(|(n, _)| format!("{AUX_PREFIX}{n}")).collect();
    let mut entries: Vec<(&str, &Tensor<F>)> = named.iter().map(|(n, t)| (n.as_str(), *t)).collect();
    entries.extend(aux_names.iter().zip(aux).map(|(n, (_, t))| (n.as_str(), *t)));
    blob::encode(KIND, &model.spec().descriptor(), &entries)
}

pub fn save_checkpoint<F: Real>(path: &Path, model: &Model<F>, aux: &[(&str, &Tensor<F>)]) -> Result<()> {
    blob::write_atomic(path, &encode_checkpoint(model, aux))
}

/// Decodes a checkpoint. When `expected` is given, the stored architecture
/// must match it exactly.
pub fn decode_checkpoint<F: Real>(bytes: &[u8], expected: Option<&ModelSpec>) -> Result<Checkpoint<F>> {
    let blob = blob::decode::<F>(bytes)?;
    if blob.kind != KIND {
        return Err(Error::Corrupt(format!("expected a checkpoint, found `{}`", blob.kind)));
    }
    if let Some(expected) = expected {
        if expected.descriptor() != blob.descriptor {
            return Err(Error::ArchitectureMismatch {
                expected: expected.descriptor(),
                found: blob.descriptor,
            });
        }
    }
    let spec = ModelSpec::from_descriptor(&blob.descriptor)?;
    let mut params: Vec<LayerParams<F>> = spec
        .layers()
        .iter()
        .map(|_| LayerParams {
            weight: None,
            bias: None,
        })
        .collect();
    let mut aux = Vec::new();
    for (name, tensor) in blob.tensors {
        if let Some(rest) = name.strip_prefix(AUX_PREFIX) {
            aux.push((rest.to_string(), tensor));
            continue;
        }
        let (layer, field) = name
            .strip_prefix("layer")
            .and_then(|s| s.split_once('.'))
            .and_then(|(i, f)| Some((i.parse::<usize>().ok()?, f)))
            .filter(|(i, _)| *i < params.len())
            .ok_or_else(|| Error::Corrupt(format!("unexpected parameter `{name}`")))?;
        let slot = match field {
            "weight" => &mut params[layer].weight,
            "bias" => &mut params[layer].bias,
            _ => return Err(Error::Corrupt(format!("unexpected parameter `{name}`"))),
        };
        if slot.replace(tensor).is_some() {
            return Err(Error::Corrupt(format!("duplicate parameter `{name}`")));
        }
    }
    let model = Model::from_params(spec, params).map_err(|e| Error::Corrupt(e.to_string()))?;
    Ok(Checkpoint { model, aux })
}

pub fn load_checkpoint<F: Real>(path: &Path, expected: Option<&ModelSpec>) -> Result<Checkpoint<F>> {
    decode_checkpoint(&blob::read_file(path)?, expected)
}
