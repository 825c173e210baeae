//! Audio preprocessing: decoding, resampling, random zero-padding and
//! spectrogram computation.

pub mod normalize;
pub mod pad;
pub mod resample;
pub mod stft;
pub mod wav;

pub use normalize::{apply_mean, fit_mean, MeanSpectrogram};
pub use pad::{pad_at, pad_random, PaddedSignal, PADDED_LEN};
pub use resample::resample_to_8k;
pub use stft::{crop_227, spectrogram_input, stft_spectrogram, to_decibels, Spectrogram};
pub use wav::{read_wav, write_wav, Waveform};

pub const SOURCE_RATE: u32 = 48_000;
pub const TARGET_RATE: u32 = 8_000;
