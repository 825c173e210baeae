//! Run configuration, read from a TOML file and overridable on the command
//! line.

use std::path::{Path, PathBuf};

use audiolrp::blob::sha256_hex;
use audiolrp::dataset::{SynthConfig, Task};
use audiolrp::eval::{RelevanceOrder, StrategyKind};
use audiolrp::lrp::LrpConfig;
use audiolrp::nn::{alexnet_variant_with, audionet_with, ArchOptions, BiasMode, ModelSpec, TrainConfig};
use audiolrp::{seed, Error, Result};
use serde::{Deserialize, Serialize};

/// Environment variable naming the default AudioMNIST root.
pub const DATA_ENV: &str = "AUDIOLRP_DATA";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Raw-waveform network.
    Audionet,
    /// Spectrogram network.
    Alexnet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSourceKind {
    Synthetic,
    Audiomnist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchSection {
    pub width: f64,
    pub bias: BiasMode,
    pub dropout: f64,
}

impl Default for ArchSection {
    fn default() -> Self {
        let d = ArchOptions::default();
        ArchSection {
            width: d.width,
            bias: d.bias,
            dropout: d.dropout,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub source: DataSourceKind,
    /// AudioMNIST root; falls back to `$AUDIOLRP_DATA`.
    pub root: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    /// Cross-validation rotations to run on AudioMNIST.
    pub rotations: Vec<usize>,
    pub train_per_class: usize,
    pub validation_per_class: usize,
    pub test_per_class: usize,
    pub synthetic: SynthConfig,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            source: DataSourceKind::Synthetic,
            root: None,
            metadata: None,
            rotations: vec![0],
            train_per_class: 50,
            validation_per_class: 10,
            test_per_class: 10,
            synthetic: SynthConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    /// Constant factor applied to mean-subtracted spectrogram inputs.
    pub input_scale: f64,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        PreprocessSection { input_scale: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Full-scale recipes.
    Full,
    /// Short schedules that finish in minutes on a desktop CPU.
    Desk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub preset: Preset,
    pub learning_rate: Option<f64>,
    pub momentum: Option<f64>,
    pub clip: Option<f64>,
    pub no_clip: bool,
    pub batch_size: Option<usize>,
    pub iterations: Option<usize>,
    pub halving_interval: Option<usize>,
    /// Validation accuracy is logged every this many iterations (and at the
    /// end); 0 logs only at the end.
    pub eval_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            preset: Preset::Desk,
            learning_rate: None,
            momentum: None,
            clip: None,
            no_clip: false,
            batch_size: None,
            iterations: None,
            halving_interval: None,
            eval_every: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbSection {
    pub strategies: Vec<StrategyKind>,
    pub fractions: Vec<f64>,
    pub relevance_order: RelevanceOrder,
    /// Upper bound on evaluated test examples; 0 means all.
    pub max_examples: usize,
    pub plot: bool,
}

impl Default for PerturbSection {
    fn default() -> Self {
        PerturbSection {
            strategies: StrategyKind::ALL.to_vec(),
            fractions: vec![0.0, 0.01, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0],
            relevance_order: RelevanceOrder::Signed,
            max_examples: 0,
            plot: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreqscaleSection {
    /// Factors above 1 are applied to the low-pitched class, factors below
    /// 1 to the high-pitched class, and 1 to every example.
    pub factors: Vec<f64>,
}

impl Default for FreqscaleSection {
    fn default() -> Self {
        FreqscaleSection {
            factors: vec![1.5, 0.66],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub model: ModelKind,
    pub precision: Precision,
    pub seed: u64,
    pub out: PathBuf,
    pub arch: ArchSection,
    pub data: DataSection,
    pub preprocess: PreprocessSection,
    pub train: TrainSection,
    pub lrp: LrpConfig,
    pub perturb: PerturbSection,
    pub freqscale: FreqscaleSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: Task::Digit,
            model: ModelKind::Audionet,
            precision: Precision::F32,
            seed: 0,
            out: PathBuf::from("runs"),
            arch: ArchSection::default(),
            data: DataSection::default(),
            preprocess: PreprocessSection::default(),
            train: TrainSection::default(),
            lrp: LrpConfig::default(),
            perturb: PerturbSection::default(),
            freqscale: FreqscaleSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    /// Hash of the canonical serialization, recorded next to every artifact.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_toml().as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        self.model_spec()?;
        self.train_config(0)?.validate()?;
        self.lrp.validate()?;
        if self.data.source == DataSourceKind::Synthetic {
            self.synth_config(0, 1).validate()?;
            if self.data.train_per_class == 0 || self.data.test_per_class == 0 {
                return Err(Error::Config("synthetic train and test sets must be non-empty".into()));
            }
        }
        if !(self.preprocess.input_scale.is_finite() && self.preprocess.input_scale > 0.0) {
            return Err(Error::Config("input_scale must be positive".into()));
        }
        if self.perturb.fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Config("perturbation fractions must lie in [0, 1]".into()));
        }
        if self.freqscale.factors.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::Config("frequency scale factors must be positive".into()));
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.task.classes()
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let opts = ArchOptions {
            width: self.arch.width,
            bias: self.arch.bias,
            dropout: self.arch.dropout,
        };
        match self.model {
            ModelKind::Audionet => audionet_with(self.classes(), &opts),
            ModelKind::Alexnet => alexnet_variant_with(self.classes(), &opts),
        }
    }

    /// Resolved optimizer settings for one cross-validation rotation.
    pub fn train_config(&self, rotation: usize) -> Result<TrainConfig> {
        let mut c = match (self.train.preset, self.model, self.task) {
            (Preset::Full, ModelKind::Alexnet, _) => TrainConfig::alexnet_full(),
            (Preset::Full, ModelKind::Audionet, Task::Digit) => TrainConfig::audionet_digit_full(),
            (Preset::Full, ModelKind::Audionet, Task::Gender) => TrainConfig::audionet_gender_full(),
            (Preset::Desk, ModelKind::Audionet, _) => TrainConfig {
                learning_rate: 0.005,
                momentum: 0.9,
                clip: Some(5.0),
                batch_size: 20,
                iterations: 600,
                halving_interval: 300,
                seed: 0,
            },
            (Preset::Desk, ModelKind::Alexnet, _) => TrainConfig {
                learning_rate: 0.01,
                momentum: 0.9,
                clip: Some(5.0),
                batch_size: 20,
                iterations: 200,
                halving_interval: 100,
                seed: 0,
            },
        };
        let t = &self.train;
        if let Some(v) = t.learning_rate {
            c.learning_rate = v;
        }
        if let Some(v) = t.momentum {
            c.momentum = v;
        }
        if t.no_clip {
            c.clip = None;
        } else if let Some(v) = t.clip {
            c.clip = Some(v);
        }
        if let Some(v) = t.batch_size {
            c.batch_size = v;
        }
        if let Some(v) = t.iterations {
            c.iterations = v;
        }
        if let Some(v) = t.halving_interval {
            c.halving_interval = v;
        }
        c.seed = seed::derive(self.seed, &format!("train/{rotation}"));
        c.validate()?;
        Ok(c)
    }

    /// Synthetic generator settings for one split; splits use disjoint
    /// speaker ids.
    pub fn synth_config(&self, split: usize, per_class: usize) -> SynthConfig {
        let speakers_per_split = self.data.synthetic.speakers as u32 * 2;
        SynthConfig {
            classes: self.classes(),
            per_class,
            first_speaker: self.data.synthetic.first_speaker + split as u32 * speakers_per_split,
            ..self.data.synthetic.clone()
        }
    }

    pub fn data_root(&self) -> Result<PathBuf> {
        self.data
            .root
            .clone()
            .or_else(|| std::env::var_os(DATA_ENV).map(PathBuf::from))
            .ok_or_else(|| Error::Config(format!("data.root is not set and ${DATA_ENV} is empty")))
    }
}
