use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

use super::{Waveform, TARGET_RATE};

/// Network input length: one second at 8 kHz.
pub const PADDED_LEN: usize = 8000;

/// An 8 kHz signal embedded at `offset` in an all-zero 8000-sample vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedSignal {
    samples: Vec<f64>,
    offset: usize,
    original_len: usize,
}

impl PaddedSignal {
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn original_len(&self) -> usize {
        self.original_len
    }

    /// Index range occupied by the original signal.
    pub fn signal_range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.original_len
    }

    /// `(8000, 1)` network input.
    pub fn to_tensor<F: Real>(&self) -> Tensor<F> {
        Tensor::from_f64(vec![PADDED_LEN, 1], &self.samples).expect("fixed length")
    }
}

/// Places `w` at a uniformly drawn offset in `[0, 8000 - len]`.
pub fn pad_random(w: &Waveform, rng: &mut impl Rng) -> Result<PaddedSignal> {
    check(w)?;
    let offset = rng.random_range(0..=PADDED_LEN - w.len());
    pad_at(w, offset)
}

/// Places `w` at a fixed offset.
pub fn pad_at(w: &Waveform, offset: usize) -> Result<PaddedSignal> {
    check(w)?;
    if offset + w.len() > PADDED_LEN {
        return Err(Error::InvalidArgument(format!(
            "offset {offset} leaves no room for {} samples",
            w.len()
        )));
    }
    let mut samples = vec![0.0; PADDED_LEN];
    samples[offset..offset + w.len()].copy_from_slice(w.samples());
    Ok(PaddedSignal {
        samples,
        offset,
        original_len: w.len(),
    })
}

fn check(w: &Waveform) -> Result<()> {
    if w.sample_rate() != TARGET_RATE {
        return Err(Error::InvalidArgument(format!(
            "padding expects {TARGET_RATE} Hz audio, got {} Hz",
            w.sample_rate()
        )));
    }
    if w.len() > PADDED_LEN {
        return Err(Error::InvalidArgument(format!(
            "signal of {} samples exceeds {PADDED_LEN}",
            w.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_length_has_no_slack() {
        let w = Waveform::new((0..8000).map(|i| (i as f64).sin()).collect(), 8000).unwrap();
        let p = pad_random(&w, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(p.offset(), 0);
        assert_eq!(p.samples(), w.samples());
    }

    #[test]
    fn seeded_placement_is_reproducible() {
        let w = Waveform::new(vec![0.5; 4000], 8000).unwrap();
        let a = pad_random(&w, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = pad_random(&w, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(a.samples()[..a.offset()].iter().all(|&v| v == 0.0));
        assert!(a.samples()[a.offset() + 4000..].iter().all(|&v| v == 0.0));
        assert!(a.samples()[a.signal_range()].iter().all(|&v| v == 0.5));
    }

    #[test]
    fn too_long_is_rejected() {
        let w = Waveform::new(vec![0.5; 8001], 8000).unwrap();
        assert!(pad_random(&w, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }
}
