//! Loading the train, validation and test sets of one rotation and fitting
//! the input representation.

use std::path::Path;

use audiolrp::audio::{fit_mean, spectrogram_input, MeanSpectrogram, Spectrogram, Waveform};
use audiolrp::audio::stft::CROP;
use audiolrp::blob::write_atomic;
use audiolrp::dataset::{
    make_folds, scan_audiomnist, synth_generate, AudioExamples, AudioRecord, FoldRole, InputRepresentation,
    Placement,
};
use audiolrp::nn::Checkpoint;
use audiolrp::{seed, Error, Real, Result, Tensor};
use rand::seq::SliceRandom;

use crate::config::{DataSourceKind, ModelKind, RunConfig};

pub const AUX_MEAN: &str = "mean";
pub const AUX_SCALE: &str = "input_scale";

const SPLIT_ROLES: [FoldRole; 3] = [FoldRole::Train, FoldRole::Validation, FoldRole::Test];

pub type Items = Vec<(Waveform, usize)>;

/// Labelled 8 kHz waveforms of one rotation.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Items,
    pub validation: Items,
    pub test: Items,
}

impl Splits {
    pub fn role(&self, role: FoldRole) -> &Items {
        match role {
            FoldRole::Train => &self.train,
            FoldRole::Validation => &self.validation,
            FoldRole::Test => &self.test,
        }
    }
}

/// Loads the splits of `rotation` listed in `roles`; the others stay
/// empty.
pub fn load_splits(cfg: &RunConfig, rotation: usize, roles: &[FoldRole], out: &Path) -> Result<Splits> {
    match cfg.data.source {
        DataSourceKind::Synthetic => synthetic_splits(cfg, rotation, roles),
        DataSourceKind::Audiomnist => audiomnist_splits(cfg, rotation, roles, out),
    }
}

fn synthetic_splits(cfg: &RunConfig, rotation: usize, roles: &[FoldRole]) -> Result<Splits> {
    let d = &cfg.data;
    let gen = |split: usize, per_class: usize| -> Result<Items> {
        if per_class == 0 || !roles.contains(&SPLIT_ROLES[split]) {
            return Ok(Vec::new());
        }
        let mut rng = seed::rng(cfg.seed, &format!("synth/{rotation}/{split}"));
        let records = synth_generate(&cfg.synth_config(split, per_class), &mut rng)?;
        load_records(cfg, records.iter())
    };
    Ok(Splits {
        train: gen(0, d.train_per_class)?,
        validation: gen(1, d.validation_per_class)?,
        test: gen(2, d.test_per_class)?,
    })
}

fn audiomnist_splits(cfg: &RunConfig, rotation: usize, roles: &[FoldRole], out: &Path) -> Result<Splits> {
    let root = cfg.data_root()?;
    let records = scan_audiomnist(&root, cfg.data.metadata.as_deref())?;
    let plan = make_folds(&records, cfg.task, seed::derive(cfg.seed, "folds"))?;
    std::fs::create_dir_all(out).map_err(|e| Error::Data(format!("{}: {e}", out.display())))?;
    write_atomic(&out.join("folds.toml"), plan.to_toml().as_bytes())?;
    let take = |role: FoldRole, per_class: usize| -> Result<Items> {
        if !roles.contains(&role) {
            return Ok(Vec::new());
        }
        let mut chosen = plan.select(&records, rotation, role)?;
        if per_class > 0 {
            chosen.shuffle(&mut seed::rng(cfg.seed, &format!("subsample/{rotation}/{role}")));
            let mut counts = vec![0usize; cfg.classes()];
            chosen.retain(|r| {
                let c = &mut counts[r.label(cfg.task)];
                *c += 1;
                *c <= per_class
            });
            chosen.sort_by_key(|r| (r.speaker, r.digit, r.take));
        }
        load_records(cfg, chosen.into_iter())
    };
    let d = &cfg.data;
    Ok(Splits {
        train: take(FoldRole::Train, d.train_per_class)?,
        validation: take(FoldRole::Validation, d.validation_per_class)?,
        test: take(FoldRole::Test, d.test_per_class)?,
    })
}

fn load_records<'a>(cfg: &RunConfig, records: impl Iterator<Item = &'a AudioRecord>) -> Result<Items> {
    records
        .map(|r| {
            let w = r.load().map_err(|e| Error::Data(format!("{}: {e}", r.describe())))?;
            Ok((w, r.label(cfg.task)))
        })
        .collect()
}

/// Seed of the fixed placement used for a split.
pub fn placement_seed(cfg: &RunConfig, role: FoldRole) -> u64 {
    seed::derive(cfg.seed, &format!("place/{role}"))
}

/// Fits the representation on training data only. Spectrogram means are
/// accumulated over one fixed placement per training example.
pub fn fit_representation(cfg: &RunConfig, train: &Items) -> Result<InputRepresentation> {
    match cfg.model {
        ModelKind::Audionet => Ok(InputRepresentation::Waveform),
        ModelKind::Alexnet => {
            let set = AudioExamples::new(train.clone(), InputRepresentation::Waveform, Placement::Random);
            let place = placement_seed(cfg, FoldRole::Train);
            let mut failure = None;
            let spectrograms = (0..train.len()).map_while(|i| match set.fixed_padded(i, place) {
                Ok(p) => Some((FoldRole::Train, spectrogram_input(&p))),
                Err(e) => {
                    failure = Some(e);
                    None
                }
            });
            let mean = fit_mean(spectrograms);
            if let Some(e) = failure {
                return Err(e);
            }
            let mean = mean?;
            Ok(InputRepresentation::Spectrogram {
                mean,
                scale: cfg.preprocess.input_scale,
            })
        }
    }
}

/// Training set with a fresh placement on every draw.
pub fn training_set(splits: &Splits, repr: &InputRepresentation) -> AudioExamples {
    AudioExamples::new(splits.train.clone(), repr.clone(), Placement::Random)
}

/// Evaluation set of `role` with its fixed, seed-derived placement.
pub fn eval_set(cfg: &RunConfig, splits: &Splits, role: FoldRole, repr: &InputRepresentation) -> AudioExamples {
    AudioExamples::new(
        splits.role(role).clone(),
        repr.clone(),
        Placement::Fixed {
            seed: placement_seed(cfg, role),
        },
    )
}

/// The representation as it will be after a round trip through a
/// checkpoint stored at precision `F`.
pub fn at_precision<F: Real>(repr: &InputRepresentation) -> Result<InputRepresentation> {
    match repr {
        InputRepresentation::Waveform => Ok(InputRepresentation::Waveform),
        InputRepresentation::Spectrogram { mean, scale } => Ok(InputRepresentation::Spectrogram {
            mean: MeanSpectrogram::from_spectrogram(Spectrogram::from_tensor(&mean.spectrogram().to_tensor::<F>())?)?,
            scale: F::from_f64_lossy(*scale).as_f64(),
        }),
    }
}

/// Auxiliary tensors that let a checkpoint rebuild its representation.
pub fn representation_aux<F: Real>(repr: &InputRepresentation) -> Vec<(&'static str, Tensor<F>)> {
    match repr {
        InputRepresentation::Waveform => Vec::new(),
        InputRepresentation::Spectrogram { mean, scale } => vec![
            (AUX_MEAN, mean.spectrogram().to_tensor()),
            (AUX_SCALE, Tensor::from_f64(vec![1], &[*scale]).expect("scalar tensor")),
        ],
    }
}

pub fn representation_from_checkpoint<F: Real>(ckpt: &Checkpoint<F>) -> Result<InputRepresentation> {
    if ckpt.model.spec().takes_waveform() {
        return Ok(InputRepresentation::Waveform);
    }
    let mean = ckpt
        .aux(AUX_MEAN)
        .ok_or_else(|| Error::Corrupt("spectrogram checkpoint without a stored mean".into()))?;
    let mean = Spectrogram::from_tensor(mean)?;
    if mean.bins() != CROP || mean.frames() != CROP {
        return Err(Error::Corrupt("stored mean has the wrong shape".into()));
    }
    let scale = ckpt
        .aux(AUX_SCALE)
        .and_then(|t| t.to_f64_vec().first().copied())
        .ok_or_else(|| Error::Corrupt("spectrogram checkpoint without an input scale".into()))?;
    Ok(InputRepresentation::Spectrogram {
        mean: MeanSpectrogram::from_spectrogram(mean)?,
        scale,
    })
}
