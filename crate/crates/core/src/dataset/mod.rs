//! Labelled audio records, speaker-disjoint cross-validation folds and a
//! synthetic stand-in for AudioMNIST.

mod examples;
mod folds;
mod scan;
mod synth;

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::audio::{read_wav, resample_to_8k, Waveform, TARGET_RATE};
use crate::error::{Error, Result};

pub use examples::{AudioExamples, InputRepresentation, Placement};
pub use folds::{make_folds, FoldPlan, Rotation, Split};
pub use scan::{check_complete, parse_file_name, scan_audiomnist, METADATA_FILE};
pub use synth::{synth_generate, DigitSynth, GenderSynth, SynthConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Digit,
    Gender,
}

impl Task {
    pub fn classes(self) -> usize {
        match self {
            Task::Digit => 10,
            Task::Gender => 2,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Digit => "digit",
            Task::Gender => "gender",
        })
    }
}

/// Role of a split within one cross-validation rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoldRole {
    Train,
    Validation,
    Test,
}

impl fmt::Display for FoldRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FoldRole::Train => "train",
            FoldRole::Validation => "validation",
            FoldRole::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AudioSource {
    File(PathBuf),
    Memory(Arc<Waveform>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AudioRecord {
    pub source: AudioSource,
    pub digit: u8,
    pub speaker: u32,
    pub gender: Gender,
    pub take: u32,
    /// Split index assigned by a [`FoldPlan`], if any.
    pub fold: Option<usize>,
}

impl AudioRecord {
    /// Class index for `task`. Gender labels are male = 0, female = 1.
    pub fn label(&self, task: Task) -> usize {
        match task {
            Task::Digit => self.digit as usize,
            Task::Gender => match self.gender {
                Gender::Male => 0,
                Gender::Female => 1,
            },
        }
    }

    /// Loads the audio at 8 kHz, resampling 48 kHz recordings.
    pub fn load(&self) -> Result<Waveform> {
        let w = match &self.source {
            AudioSource::File(path) => read_wav(path)?,
            AudioSource::Memory(w) => return Ok((**w).clone()),
        };
        if w.sample_rate() == TARGET_RATE {
            Ok(w)
        } else {
            resample_to_8k(&w)
        }
    }

    pub fn describe(&self) -> String {
        match &self.source {
            AudioSource::File(p) => p.display().to_string(),
            AudioSource::Memory(_) => {
                format!("synthetic speaker {} digit {} take {}", self.speaker, self.digit, self.take)
            }
        }
    }
}

pub(crate) fn validate_labels(r: &AudioRecord) -> Result<()> {
    if r.digit > 9 {
        return Err(Error::Data(format!("digit label {} out of range", r.digit)));
    }
    Ok(())
}
