use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::audio::{apply_mean, pad_random, spectrogram_input, MeanSpectrogram, PaddedSignal, Spectrogram, Waveform};
use crate::error::Result;
use crate::nn::ExampleSource;
use crate::seed;
use crate::tensor::{Real, Tensor};

/// How a padded signal becomes a network input.
#[derive(Debug, Clone, PartialEq)]
pub enum InputRepresentation {
    /// The 8000 raw samples, shape `(8000, 1)`.
    Waveform,
    /// Cropped dB spectrogram minus the training mean, times `scale`,
    /// shape `(227, 227, 1)`.
    Spectrogram { mean: MeanSpectrogram, scale: f64 },
}

impl InputRepresentation {
    pub fn encode<F: Real>(&self, p: &PaddedSignal) -> Result<Tensor<F>> {
        match self {
            InputRepresentation::Waveform => Ok(p.to_tensor()),
            InputRepresentation::Spectrogram { .. } => self.encode_spectrogram(&spectrogram_input(p)),
        }
    }

    /// Encodes an already computed (and possibly manipulated) dB spectrogram.
    pub fn encode_spectrogram<F: Real>(&self, s: &Spectrogram) -> Result<Tensor<F>> {
        match self {
            InputRepresentation::Spectrogram { mean, scale } => {
                let mut centred = apply_mean(s, mean)?;
                centred.data_mut().iter_mut().for_each(|v| *v *= scale);
                Ok(centred.to_tensor())
            }
            InputRepresentation::Waveform => Err(crate::error::Error::Config(
                "a waveform model cannot take spectrogram input".into(),
            )),
        }
    }
}

/// Where signals sit inside the zero-padded input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// A fresh offset on every draw, from the caller's generator.
    Random,
    /// One offset per example, derived from `seed` and the example index.
    Fixed { seed: u64 },
}

/// Labelled 8 kHz waveforms turned into network inputs on demand.
#[derive(Debug, Clone)]
pub struct AudioExamples {
    items: Vec<(Waveform, usize)>,
    repr: InputRepresentation,
    placement: Placement,
}

impl AudioExamples {
    pub fn new(items: Vec<(Waveform, usize)>, repr: InputRepresentation, placement: Placement) -> Self {
        AudioExamples { items, repr, placement }
    }

    pub fn items(&self) -> &[(Waveform, usize)] {
        &self.items
    }

    pub fn representation(&self) -> &InputRepresentation {
        &self.repr
    }

    /// The padded signal of example `index` under fixed placement with
    /// `seed`, whatever this set's own placement policy.
    pub fn fixed_padded(&self, index: usize, seed: u64) -> Result<PaddedSignal> {
        pad_random(&self.items[index].0, &mut seed::rng(seed, &format!("place/{index}")))
    }

    fn padded(&self, index: usize, rng: &mut ChaCha8Rng) -> Result<PaddedSignal> {
        match self.placement {
            Placement::Random => pad_random(&self.items[index].0, rng),
            Placement::Fixed { seed } => self.fixed_padded(index, seed),
        }
    }

    /// Encodes the first `limit` examples (all when `None`). Under random
    /// placement example `i` draws from a generator seeded with `i`.
    pub fn materialize<F: Real>(&self, limit: Option<usize>) -> Result<Vec<(Tensor<F>, usize)>> {
        let n = limit.map_or(self.items.len(), |l| l.min(self.items.len()));
        (0..n)
            .map(|i| self.example(i, &mut ChaCha8Rng::seed_from_u64(i as u64)))
            .collect()
    }
}

impl<F: Real> ExampleSource<F> for AudioExamples {
    fn len(&self) -> usize {
        self.items.len()
    }

    fn example(&self, index: usize, rng: &mut ChaCha8Rng) -> Result<(Tensor<F>, usize)> {
        let p = self.padded(index, rng)?;
        Ok((self.repr.encode(&p)?, self.items[index].1))
    }
}
